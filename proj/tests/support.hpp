#pragma once

#include "idsbench/error.hpp"
#include "idsbench/matrix.hpp"
#include "idsbench/rng.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <filesystem>
#include <string>
#include <vector>

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("idsbench-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline ids::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0,
                                 double hi = 1.0) {
    ids::Rng rng(seed);
    ids::Matrix m(rows, cols);
    for (auto& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

// Labels from a noisy linear rule on the first columns, so every learner has signal.
inline ids::Labels linear_labels(const ids::Matrix& x, std::uint64_t seed, double noise = 0.3) {
    ids::Rng rng(seed);
    ids::Labels y(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < std::min<std::size_t>(x.cols, 3); ++j) z += (j % 2 ? -1.0 : 1.0) * x(i, j);
        z += noise * (rng.uniform() - 0.5);
        y[i] = z > 0.0 ? 1 : 0;
    }
    return y;
}

/// CSV with a header: two numeric columns, a binary column, a categorical
/// column with a missing cell now and then, and a "label" column of
/// normal/attack tokens. Classes are imbalanced (about 35% attack).
inline std::string synthetic_csv(std::size_t n, std::uint64_t seed) {
    ids::Rng rng(seed);
    std::string out = "num_a,num_b,flag,proto,label\n";
    char buf[160];
    for (std::size_t i = 0; i < n; ++i) {
        const bool attack = rng.uniform() < 0.35;
        const double a = rng.uniform(-1.0, 1.0) + (attack ? 1.2 : 0.0);
        const double b = rng.uniform(-1.0, 1.0) - (attack ? 0.6 : 0.0);
        const int flag = rng.uniform() < (attack ? 0.8 : 0.3) ? 1 : 0;
        static const char* kProtos[] = {"tcp", "udp", "icmp"};
        const char* proto = rng.uniform() < 0.03 ? "" : kProtos[rng.below(attack ? 3 : 2)];
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%d,%s,%s\n", a, b, flag, proto, attack ? "attack" : "normal");
        out += buf;
    }
    return out;
}

inline const char* kSyntheticSchema = R"({
  "id": "synthetic",
  "header": true,
  "columns": [
    {"name": "num_a", "kind": "numeric"},
    {"name": "num_b", "kind": "numeric"},
    {"name": "flag", "kind": "binary"},
    {"name": "proto", "kind": "categorical"},
    {"name": "label", "role": "label"}
  ],
  "label_spec": {"negative_tokens": ["normal"], "mode": "complement"}
})";

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::FILE* f = std::fopen(p.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write " + p.string());
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
}

} // namespace testing
