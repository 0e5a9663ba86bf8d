#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace evirex {

// FNV-1a, 64-bit. Used for artifact/config fingerprints in manifests; not a
// cryptographic hash.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& s);
std::string to_hex(std::uint64_t v);

// IEEE 754 binary16 conversion (round-to-nearest-even). The silver evidence
// store persists distributions at 16-bit precision.
std::uint16_t float_to_half(float f);
float half_to_float(std::uint16_t h);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
std::uint64_t hash_file(const std::string& path);

// Single RNG type threaded through every stochastic choice in the artifact.
using Rng = std::mt19937_64;

std::vector<std::string> split_lines(const std::string& text);

} // namespace evirex
