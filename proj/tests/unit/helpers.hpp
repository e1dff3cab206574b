#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "textmask/raster.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("textmask_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline textmask::LabelTable abc_table() { return textmask::LabelTable::from_labels({"a", "b", "c"}); }

inline textmask::LabelGrid grid(std::size_t rows, std::size_t cols, std::vector<textmask::LabelId> cells,
                                const textmask::LabelTable& table = abc_table()) {
  return textmask::LabelGrid(rows, cols, std::move(cells), table);
}

inline textmask::BinaryGrid bits(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> b) {
  return textmask::BinaryGrid(rows, cols, std::move(b));
}

}  // namespace testutil
