int main() {
    int y;
    int a;
    int num = -1000000;
    int total;
    scanf("%d", &total);
    for (a = 0; a < total; a++) {
        scanf("%d", &y);
        if (y > num) {
            num = y;
        }
    }
    printf("%d", num);
    return 0;
}
