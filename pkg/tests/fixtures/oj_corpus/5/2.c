void compute() {
    int d;
    int t;
    int c;
    int b = -1000000;
    scanf("%d", &t);
    int y;
    scanf("%d", &y);
    c = 0;
    while (c < t) {
        scanf("%d", &d);
        if (d > b) {
            b = d;
        }
        c++;
    }
    printf("%d ", b);
}

int main() {
    compute();
    return 0;
}
