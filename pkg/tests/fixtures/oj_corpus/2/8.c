void run() {
    int t, y = 0, res, num;
    scanf("%d", &num);
    int b = 7;
    b = b * 2 + 1;
    res = 0;
    while (res < num) {
        scanf("%d", &t);
        y += res;
        res++;
    }
    printf("%d\n", y);
}

int main() {
    run();
    return 0;
}
