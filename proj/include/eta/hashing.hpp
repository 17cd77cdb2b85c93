#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "eta/errors.hpp"
#include "eta/matrix.hpp"
#include "eta/rng.hpp"

namespace eta {

// Which thresholding rule turns projections into bits.
//  SignOfInnerProduct: bit_i = [ sum_j e_j * H[j][i] > 0 ]  (standard
//    hyperplane LSH; satisfies the theta/pi disagreement law)
//  SumOfSigns:         bit_i = [ sum_j sgn(e_j * H[j][i]) > 0 ]
// SignOfInnerProduct is the default; SumOfSigns is kept for comparison.
enum class SimHashVariant { SignOfInnerProduct, SumOfSigns };

// Bit-packed m-bit signature. Padding bits above m are always zero.
struct Fingerprint {
    std::vector<std::uint64_t> words;
    std::size_t m = 0;

    explicit Fingerprint(std::size_t bits = 0) : words((bits + 63) / 64, 0), m(bits) {}

    bool get(std::size_t i) const { return (words[i >> 6] >> (i & 63)) & 1u; }
    void set(std::size_t i) { words[i >> 6] |= std::uint64_t{1} << (i & 63); }

    bool operator==(const Fingerprint& o) const = default;
};

// Fixed random projection matrix H (d x m). Immutable after construction;
// the same (d, m, seed) always yields the same planes.
class HashPlanes {
public:
    HashPlanes(std::size_t d, std::size_t m, std::uint64_t seed)
        : d_(d), m_(m), seed_(seed) {
        if (d == 0 || m == 0)
            throw ParamError("HashPlanes: d and m must be >= 1");
        Rng rng(seed);
        planes_ = Matrix::gaussian(d, m, rng);
    }

    // explicit plane matrix (hand-built planes in tests / fixtures)
    explicit HashPlanes(Matrix planes, std::uint64_t seed = 0)
        : d_(planes.rows), m_(planes.cols), seed_(seed), planes_(std::move(planes)) {
        if (d_ == 0 || m_ == 0)
            throw ParamError("HashPlanes: d and m must be >= 1");
    }

    std::size_t d() const { return d_; }
    std::size_t m() const { return m_; }
    std::uint64_t seed() const { return seed_; }
    const Matrix& matrix() const { return planes_; }

private:
    std::size_t d_;
    std::size_t m_;
    std::uint64_t seed_;
    Matrix planes_;
};

inline HashPlanes new_planes(std::size_t d, std::size_t m, std::uint64_t seed) {
    return HashPlanes(d, m, seed);
}

inline Fingerprint simhash(const double* e, std::size_t len, const HashPlanes& planes,
                           SimHashVariant variant = SimHashVariant::SignOfInnerProduct) {
    if (len != planes.d())
        throw ShapeError("simhash: vector length " + std::to_string(len) +
                         " != planes.d " + std::to_string(planes.d()));
    const Matrix& h = planes.matrix();
    Fingerprint fp(planes.m());
    for (std::size_t i = 0; i < planes.m(); ++i) {
        double acc = 0.0;
        if (variant == SimHashVariant::SignOfInnerProduct) {
            for (std::size_t j = 0; j < len; ++j) acc += e[j] * h.at(j, i);
        } else {
            for (std::size_t j = 0; j < len; ++j) {
                double p = e[j] * h.at(j, i);
                acc += (p > 0.0) - (p < 0.0);
            }
        }
        // projection exactly 0 maps to bit 0
        if (acc > 0.0) fp.set(i);
    }
    return fp;
}

inline Fingerprint simhash(const std::vector<double>& e, const HashPlanes& planes,
                           SimHashVariant variant = SimHashVariant::SignOfInnerProduct) {
    return simhash(e.data(), e.size(), planes, variant);
}

inline std::size_t hamming(const Fingerprint& a, const Fingerprint& b) {
    if (a.m != b.m)
        throw ParamError("hamming: fingerprint lengths differ: " + std::to_string(a.m) +
                         " vs " + std::to_string(b.m));
    std::size_t count = 0;
    for (std::size_t w = 0; w < a.words.size(); ++w)
        count += static_cast<std::size_t>(std::popcount(a.words[w] ^ b.words[w]));
    return count;
}

// Fingerprints for all L rows of E via one matmul + threshold. Matches
// per-row simhash bit for bit (SignOfInnerProduct path only; the batch form
// of SumOfSigns is not needed anywhere).
inline std::vector<Fingerprint> fingerprint_batch(const Matrix& e, const HashPlanes& planes) {
    if (e.cols != planes.d())
        throw ShapeError("fingerprint_batch: E.cols " + std::to_string(e.cols) +
                         " != planes.d " + std::to_string(planes.d()));
    Matrix proj = matmul(e, planes.matrix());
    std::vector<Fingerprint> out;
    out.reserve(e.rows);
    for (std::size_t r = 0; r < e.rows; ++r) {
        Fingerprint fp(planes.m());
        const double* row = proj.row_ptr(r);
        for (std::size_t i = 0; i < planes.m(); ++i)
            if (row[i] > 0.0) fp.set(i);
        out.push_back(std::move(fp));
    }
    return out;
}

}  // namespace eta
