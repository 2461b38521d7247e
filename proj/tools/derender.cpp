#include <cstdio>
int main() { std::puts("derender: under construction"); return 0; }
