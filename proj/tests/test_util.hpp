#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "ddcnn/rng.hpp"
#include "ddcnn/tensor.hpp"

namespace testutil {

template <typename T>
ddcnn::Tensor<T> random_tensor(ddcnn::Rng& rng, std::vector<std::size_t> dims,
                               double lo = -1.0, double hi = 1.0) {
    ddcnn::Tensor<T> t(std::move(dims));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<T>(rng.uniform(lo, hi));
    }
    return t;
}

// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl =
            (std::filesystem::temp_directory_path() / "ddcnn_test_XXXXXX").string();
        if (!mkdtemp(tmpl.data())) {
            throw std::runtime_error("mkdtemp failed");
        }
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace testutil
