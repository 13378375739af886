#pragma once

#include <string>
#include <vector>

#include "tmhd/field.hpp"

namespace tmhd {

/// MHDF1 field container: 5-byte magic "MHDF1", 4-byte little-endian header
/// length, UTF-8 JSON header, then raw little-endian float64 payload in
/// time-major, component-major, x-fastest order.
struct Mhdf1 {
    int version = 1;
    int grid_n = 0;
    int components = 0;
    int time_samples = 0;
    std::vector<double> times;                        // optional extra header data
    std::vector<std::vector<ScalarField>> frames;     // [time][component]
};

void write_mhdf1(const std::string& path, const Mhdf1& data);
Mhdf1 read_mhdf1(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace tmhd
