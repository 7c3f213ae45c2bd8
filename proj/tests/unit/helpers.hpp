#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "vista/corpus.hpp"
#include "vista/layout.hpp"

namespace test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("vista-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
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

inline vista::corpus::ActivationVector sparse(std::vector<vista::corpus::LatentId> idx,
                                              std::vector<double> val, std::size_t dim = 16) {
  return vista::corpus::ActivationVector(std::move(idx), std::move(val), dim);
}

/// Slice whose members carry the given vectors and normalized activations.
inline vista::corpus::LatentSlice make_slice(const std::vector<vista::corpus::ActivationVector>& vs,
                                             const std::vector<double>& norm) {
  vista::corpus::LatentSlice s;
  s.dim = vs.empty() ? 0 : vs.front().dim();
  s.source_size = vs.size();
  for (std::size_t i = 0; i < vs.size(); ++i) {
    vista::corpus::SliceMember m;
    m.item = {"i" + std::to_string(i), "item " + std::to_string(i)};
    m.vector = vs[i];
    m.raw_activation = 1.0 + norm[i];
    m.norm_activation = norm[i];
    s.members.push_back(std::move(m));
  }
  return s;
}

inline vista::layout::Embedding2D embedding_of(std::vector<vista::metric::Point2> pts,
                                               vista::layout::Aspect aspect = {}) {
  vista::layout::Embedding2D e;
  e.bounds = vista::layout::bounds_of(pts);
  e.coords = std::move(pts);
  e.aspect = aspect;
  return e;
}

}  // namespace test
