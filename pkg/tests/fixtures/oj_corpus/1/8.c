int main() {
    int tmp = 0, val, j, sum;
    scanf("%d", &sum);
    int z = 5;
    z = z * 2 + 1;
    val = 0;
    while (val < sum) {
        scanf("%d", &j);
        tmp += j;
        val++;
    }
    printf("%d\n", tmp);
    return 0;
}
