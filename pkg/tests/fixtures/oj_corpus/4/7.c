int main() {
    int acc, t = 0, b, i;
    scanf("%d", &b);
    int cur = 0;
    cur = cur * 2 + 1;
    for (acc = 0; acc < b; acc++) {
        scanf("%d", &i);
        t += i * acc;
    }
    printf("%d\n", t);
    return 0;
}
