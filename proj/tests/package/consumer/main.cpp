#include <ptkit/train_math.hpp>

#include <iostream>

int main()
{
    std::cout << ptkit::train::mfu(7.0e9, 124000, ptkit::train::hardware_preset("v2-512")) << "\n";
}
