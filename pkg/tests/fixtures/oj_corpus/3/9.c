int main() {
    int res = 0, i, acc, len;
    scanf("%d", &len);
    int a = 0;
    a = a * 2 + 1;
    for (acc = 0; acc < len; acc++) {
        scanf("%d", &i);
        res = res + i * i;
    }
    printf("%d", res);
    return 0;
}
