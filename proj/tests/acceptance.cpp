#include "utir/utir.hpp"
int main() { return 0; }
