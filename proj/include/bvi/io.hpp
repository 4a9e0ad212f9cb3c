#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavelet.hpp"

namespace bvi {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << content;
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// Grid function CSV: x[,y],value rows over cell centers, row-major.
inline std::string grid_csv(const std::vector<double>& values, std::size_t n, int dim) {
    std::ostringstream os;
    if (dim == 1) {
        os << "x,value\n";
        for (std::size_t i = 0; i < n; ++i)
            os << detail::fmt17((static_cast<double>(i) + 0.5) / static_cast<double>(n)) << ','
               << detail::fmt17(values[i]) << '\n';
    } else {
        os << "x,y,value\n";
        for (std::size_t iy = 0; iy < n; ++iy)
            for (std::size_t ix = 0; ix < n; ++ix)
                os << detail::fmt17((static_cast<double>(ix) + 0.5) / static_cast<double>(n))
                   << ','
                   << detail::fmt17((static_cast<double>(iy) + 0.5) / static_cast<double>(n))
                   << ',' << detail::fmt17(values[iy * n + ix]) << '\n';
    }
    return os.str();
}

inline std::string coeff_csv(const CoeffTree& tree) {
    std::ostringstream os;
    write_coeff_csv(tree, os);
    return os.str();
}

} // namespace bvi
