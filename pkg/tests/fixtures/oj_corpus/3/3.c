int main() {
    int y, z = 0, i, t;
    scanf("%d", &y);
    for (i = 0; i < y; i++) {
        scanf("%d", &t);
        z += t * t;
    }
    printf("%d", z);
    return 0;
}
