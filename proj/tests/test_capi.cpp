#include "edgecache.h"
int main() { return 0; }
