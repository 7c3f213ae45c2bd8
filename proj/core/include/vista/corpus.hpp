#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vista::corpus {

using LatentId = std::uint32_t;

struct Item {
  std::string id;
  std::string text;

  friend bool operator==(const Item&, const Item&) = default;
};

/// Sparse activation vector over a latent space of size `dim`.
///
/// Indices are strictly increasing, every index is below `dim` and every
/// stored value is strictly positive; zeros are implicit.
class ActivationVector {
 public:
  ActivationVector() = default;

  /// Validating constructor. Throws ValidationError on any invariant breach.
  ActivationVector(std::vector<LatentId> indices, std::vector<double> values,
                   std::size_t dim);

  /// Builds a sparse vector from a dense one by dropping exact zeros.
  /// Negative or non-finite entries are rejected.
  static ActivationVector from_dense(const std::vector<double>& dense);

  const std::vector<LatentId>& indices() const { return indices_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t dim() const { return dim_; }
  std::size_t nnz() const { return indices_.size(); }

  friend bool operator==(const ActivationVector&,
                         const ActivationVector&) = default;

 private:
  std::vector<LatentId> indices_;
  std::vector<double> values_;
  std::size_t dim_ = 0;
};

/// Stored activation for `latent`, or 0.0 when the latent is not active.
double activation_of(const ActivationVector& v, LatentId latent);

struct Entry {
  Item item;
  ActivationVector vector;

  friend bool operator==(const Entry&, const Entry&) = default;
};

class Corpus {
 public:
  Corpus() = default;
  /// Throws ValidationError on duplicate or empty ids, empty text, or a
  /// vector whose dim differs from `dim`.
  Corpus(std::vector<Entry> entries, std::size_t dim);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  std::vector<Entry> entries_;
  std::size_t dim_ = 0;
};

/// Reads the JSONL corpus format. Error messages carry the 1-based line.
Corpus load_corpus(const std::filesystem::path& path, std::size_t dim);

/// Parses one JSONL line into an Entry (exposed for streaming readers).
Entry parse_corpus_line(const std::string& line, std::size_t dim);

/// Writes the sparse JSONL form; load_corpus reproduces an equal Corpus.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Either a fraction of the corpus in (0, 1] or an absolute item count.
class SelectionTarget {
 public:
  static SelectionTarget fraction(double f);
  static SelectionTarget count(std::size_t n);

  /// Number of items requested from a corpus of `corpus_size` items.
  std::size_t resolve(std::size_t corpus_size) const;

  std::optional<double> as_fraction() const { return fraction_; }
  std::optional<std::size_t> as_count() const { return count_; }

 private:
  std::optional<double> fraction_;
  std::optional<std::size_t> count_;
};

struct SliceMember {
  Item item;
  ActivationVector vector;
  double raw_activation = 0.0;
  double norm_activation = 0.0;

  friend bool operator==(const SliceMember&, const SliceMember&) = default;
};

/// Top-activating items for one latent, sorted by descending activation.
struct LatentSlice {
  LatentId latent_id = 0;
  std::vector<SliceMember> members;
  std::size_t source_size = 0;
  std::size_t dim = 0;

  std::size_t size() const { return members.size(); }

  friend bool operator==(const LatentSlice&, const LatentSlice&) = default;
};

/// Picks the items with the highest activation on `latent`. Items that do
/// not activate the latent are never included, even when that leaves the
/// slice short of the target. Ties at the cutoff go to the earlier item.
LatentSlice select_top_activating(const Corpus& corpus, LatentId latent,
                                  const SelectionTarget& target);

/// Min-max normalization of the slice's raw activations (all zeros when
/// every raw activation is equal). Applied in place.
void normalize_activations(LatentSlice& slice);

void save_slice(const LatentSlice& slice, const std::filesystem::path& path);
LatentSlice load_slice(const std::filesystem::path& path);

}  // namespace vista::corpus
