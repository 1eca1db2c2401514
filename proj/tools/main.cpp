#include <iostream>

int main() {
  std::cout << "mvmlab CLI placeholder\n";
  return 1;
}
