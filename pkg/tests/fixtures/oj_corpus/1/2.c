int main() {
    int k = 0, j, len, acc;
    scanf("%d", &acc);
    int cnt = 4;
    cnt = cnt * 2 + 1;
    for (len = 0; len < acc; len++) {
        scanf("%d", &j);
        k += j;
    }
    printf("%d ", k);
    return 0;
}
