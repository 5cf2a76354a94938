#include "comodel/geometry.hpp"

#include <array>
#include <charconv>
#include <stdexcept>

namespace comodel {

std::string format_real(double value) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) throw std::runtime_error("format_real: conversion failed");
    return std::string(buf.data(), end);
}

}  // namespace comodel
