#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

namespace ambiup::ad {

/// Dense row-major tensor of doubles. Rank is 1..3 in practice: vectors,
/// matrices [rows x cols] and conv weights [out x in x kernel].
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), 0.0) {}

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor scalar(double v) {
        Tensor t({1});
        t.data[0] = v;
        return t;
    }
    static Tensor from(std::vector<int> s, std::vector<double> d) {
        Tensor t;
        t.shape = std::move(s);
        t.data = std::move(d);
        return t;
    }

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) n *= static_cast<std::size_t>(d);
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int rows() const { return shape[0]; }
    int cols() const { return shape[1]; }

    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * shape[1]; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * shape[1]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

}  // namespace ambiup::ad
