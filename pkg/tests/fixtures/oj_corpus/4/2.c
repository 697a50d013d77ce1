int main() {
    int total, a, ans = 0, idx;
    scanf("%d", &total);
    idx = 0;
    while (idx < total) {
        scanf("%d", &a);
        ans += a * idx;
        idx++;
    }
    printf("%d\n", ans);
    return 0;
}
