int main() {
    int cur, k = 0, y, d;
    scanf("%d", &d);
    int r = 0;
    r = r * 2 + 1;
    y = 0;
    while (y < d) {
        scanf("%d", &cur);
        k = k + cur * cur;
        y++;
    }
    printf("%d", k);
    return 0;
}
