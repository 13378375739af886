#include "tmhd/mhdf_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace tmhd {

namespace {

// the container is little-endian by contract
void require_le() {
    const std::uint32_t probe = 1;
    if (*reinterpret_cast<const std::uint8_t*>(&probe) != 1)
        throw std::runtime_error("MHDF1: big-endian hosts need byte swapping (unimplemented)");
}

}  // namespace

void write_mhdf1(const std::string& path, const Mhdf1& data) {
    require_le();
    if (data.frames.empty() || data.frames.front().empty())
        throw std::invalid_argument("write_mhdf1: no frames");
    nlohmann::json h;
    h["version"] = data.version;
    h["grid"] = {data.grid_n, data.grid_n, data.grid_n};
    h["components"] = data.components;
    h["time_samples"] = data.time_samples;
    h["dtype"] = "f64le";
    h["layout"] = "time-major, component-major, x-fastest";
    if (!data.times.empty()) h["times"] = data.times;
    std::string header = h.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_mhdf1: cannot open " + path);
    out.write("MHDF1", 5);
    std::uint32_t len = static_cast<std::uint32_t>(header.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(header.data(), header.size());
    const std::size_t npts =
        static_cast<std::size_t>(data.grid_n) * data.grid_n * data.grid_n;
    for (const auto& frame : data.frames) {
        if (static_cast<int>(frame.size()) != data.components)
            throw std::invalid_argument("write_mhdf1: component count mismatch");
        for (const auto& comp : frame) {
            if (comp.values.size() != npts)
                throw std::invalid_argument("write_mhdf1: grid size mismatch");
            out.write(reinterpret_cast<const char*>(comp.values.data()),
                      static_cast<std::streamsize>(npts * sizeof(double)));
        }
    }
    if (!out) throw std::runtime_error("write_mhdf1: write failed for " + path);
}

Mhdf1 read_mhdf1(const std::string& path) {
    require_le();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_mhdf1: cannot open " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "MHDF1", 5) != 0)
        throw std::runtime_error("read_mhdf1: bad magic in " + path);
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string header(len, '\0');
    in.read(header.data(), len);
    if (!in) throw std::runtime_error("read_mhdf1: truncated header in " + path);
    nlohmann::json h = nlohmann::json::parse(header);

    Mhdf1 data;
    data.version = h.at("version").get<int>();
    auto grid = h.at("grid");
    data.grid_n = grid.at(0).get<int>();
    if (grid.at(1).get<int>() != data.grid_n || grid.at(2).get<int>() != data.grid_n)
        throw std::runtime_error("read_mhdf1: non-cubic grid");
    data.components = h.at("components").get<int>();
    data.time_samples = h.at("time_samples").get<int>();
    if (h.at("dtype").get<std::string>() != "f64le")
        throw std::runtime_error("read_mhdf1: unsupported dtype");
    if (h.contains("times")) data.times = h.at("times").get<std::vector<double>>();

    GridSpec g(data.grid_n);
    const std::size_t npts = g.points();
    data.frames.assign(data.time_samples, std::vector<ScalarField>(data.components, ScalarField(g)));
    for (auto& frame : data.frames)
        for (auto& comp : frame) {
            in.read(reinterpret_cast<char*>(comp.values.data()),
                    static_cast<std::streamsize>(npts * sizeof(double)));
            if (!in) throw std::runtime_error("read_mhdf1: truncated payload in " + path);
        }
    return data;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_text_file: cannot open " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_text_file: cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace tmhd
