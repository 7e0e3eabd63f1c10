#pragma once

#include <cstddef>
#include <vector>

namespace cyltomo {

/// Row-major 2D array; row index = v, column index = u.
template <typename T>
struct Image {
    using value_type = T;
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Image() = default;
    Image(int r, int c, T fill = T(0)) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    T& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool contains(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
};

template <typename To, typename From>
Image<To> image_cast(const Image<From>& in) {
    Image<To> out(in.rows, in.cols);
    for (std::size_t k = 0; k < in.data.size(); ++k)
        out.data[k] = static_cast<To>(in.data[k]);
    return out;
}

} // namespace cyltomo
