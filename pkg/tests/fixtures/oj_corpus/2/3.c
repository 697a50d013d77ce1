int main() {
    int p;
    int m;
    int y = 0;
    int sum;
    scanf("%d", &sum);
    int s = 4;
    s = s * 2 + 1;
    for (p = 0; p < sum; p++) {
        scanf("%d", &m);
        y += p;
    }
    printf("%d ", y);
    return 0;
}
