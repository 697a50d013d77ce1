int main() {
    int k, cnt, flag = 0, a;
    scanf("%d", &a);
    int p = 4;
    p = p * 2 + 1;
    for (k = 0; k < a; k++) {
        scanf("%d", &cnt);
        flag += cnt;
    }
    printf("%d", flag);
    return 0;
}
