#include "vista/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "json.hpp"
#include "vista/error.hpp"

namespace vista::corpus {

using nlohmann::json;

ActivationVector::ActivationVector(std::vector<LatentId> indices,
                                   std::vector<double> values, std::size_t dim)
    : indices_(std::move(indices)), values_(std::move(values)), dim_(dim) {
  if (indices_.size() != values_.size()) {
    throw ValidationError("activation vector: " +
                          std::to_string(indices_.size()) + " indices but " +
                          std::to_string(values_.size()) + " values");
  }
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (k > 0 && indices_[k] <= indices_[k - 1]) {
      throw ValidationError("activation vector: indices not strictly increasing at position " +
                            std::to_string(k));
    }
    if (indices_[k] >= dim_) {
      throw ValidationError("activation vector: index " +
                            std::to_string(indices_[k]) + " >= dim " +
                            std::to_string(dim_));
    }
    if (!std::isfinite(values_[k]) || values_[k] <= 0.0) {
      throw ValidationError("activation vector: non-positive value at index " +
                            std::to_string(indices_[k]));
    }
  }
}

ActivationVector ActivationVector::from_dense(const std::vector<double>& dense) {
  std::vector<LatentId> idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] == 0.0) continue;
    idx.push_back(static_cast<LatentId>(i));
    val.push_back(dense[i]);
  }
  return ActivationVector(std::move(idx), std::move(val), dense.size());
}

double activation_of(const ActivationVector& v, LatentId latent) {
  if (latent >= v.dim()) {
    throw ValidationError("latent " + std::to_string(latent) +
                          " out of range for dim " + std::to_string(v.dim()));
  }
  const auto& idx = v.indices();
  auto it = std::lower_bound(idx.begin(), idx.end(), latent);
  if (it == idx.end() || *it != latent) return 0.0;
  return v.values()[static_cast<std::size_t>(it - idx.begin())];
}

Corpus::Corpus(std::vector<Entry> entries, std::size_t dim)
    : entries_(std::move(entries)), dim_(dim) {
  std::unordered_set<std::string> seen;
  seen.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.item.id.empty()) throw ValidationError("corpus: empty item id");
    if (e.item.text.empty()) {
      throw ValidationError("corpus: empty text for item '" + e.item.id + "'");
    }
    if (e.vector.dim() != dim_) {
      throw ValidationError("corpus: item '" + e.item.id + "' has dim " +
                            std::to_string(e.vector.dim()) + ", expected " +
                            std::to_string(dim_));
    }
    if (!seen.insert(e.item.id).second) {
      throw ValidationError("corpus: duplicate id '" + e.item.id + "'");
    }
  }
}

Entry parse_corpus_line(const std::string& line, std::size_t dim) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ValidationError("expected a JSON object");
  try {
    Entry entry;
    entry.item.id = obj.at("id").get<std::string>();
    entry.item.text = obj.at("text").get<std::string>();
    if (obj.contains("vector")) {
      auto dense = obj.at("vector").get<std::vector<double>>();
      if (dense.size() != dim) {
        throw ValidationError("dense vector has length " +
                              std::to_string(dense.size()) + ", expected " +
                              std::to_string(dim));
      }
      entry.vector = ActivationVector::from_dense(dense);
    } else {
      for (const auto& ix : obj.at("indices")) {
        if (!ix.is_number_integer() || ix.get<std::int64_t>() < 0) {
          throw ValidationError("indices must be non-negative integers");
        }
      }
      auto indices = obj.at("indices").get<std::vector<std::int64_t>>();
      std::vector<LatentId> idx;
      idx.reserve(indices.size());
      for (auto i : indices) {
        if (static_cast<std::uint64_t>(i) >= dim) {
          throw ValidationError("index " + std::to_string(i) + " >= dim " +
                                std::to_string(dim));
        }
        idx.push_back(static_cast<LatentId>(i));
      }
      entry.vector = ActivationVector(
          std::move(idx), obj.at("values").get<std::vector<double>>(), dim);
    }
    return entry;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad field: ") + e.what());
  }
}

Corpus load_corpus(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  std::vector<Entry> entries;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Entry entry;
    try {
      entry = parse_corpus_line(line, dim);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
    if (!seen.insert(entry.item.id).second) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": duplicate id '" + entry.item.id + "'");
    }
    entries.push_back(std::move(entry));
  }
  try {
    return Corpus(std::move(entries), dim);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file " + path.string());
  for (const auto& e : corpus.entries()) {
    json obj;
    obj["id"] = e.item.id;
    obj["text"] = e.item.text;
    obj["indices"] = e.vector.indices();
    obj["values"] = e.vector.values();
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

SelectionTarget SelectionTarget::fraction(double f) {
  if (!(f > 0.0 && f <= 1.0)) {
    throw ValidationError("selection fraction must be in (0, 1]");
  }
  SelectionTarget t;
  t.fraction_ = f;
  return t;
}

SelectionTarget SelectionTarget::count(std::size_t n) {
  if (n == 0) throw ValidationError("selection count must be positive");
  SelectionTarget t;
  t.count_ = n;
  return t;
}

std::size_t SelectionTarget::resolve(std::size_t corpus_size) const {
  if (count_) return *count_;
  // 0.02 * 200000 must give 4000, not 4001, despite representation error.
  const double want = *fraction_ * static_cast<double>(corpus_size);
  return static_cast<std::size_t>(std::ceil(want - 1e-9 * std::max(1.0, want)));
}

void normalize_activations(LatentSlice& slice) {
  if (slice.members.empty()) return;
  double lo = slice.members.front().raw_activation;
  double hi = lo;
  for (const auto& m : slice.members) {
    lo = std::min(lo, m.raw_activation);
    hi = std::max(hi, m.raw_activation);
  }
  const double range = hi - lo;
  for (auto& m : slice.members) {
    m.norm_activation = range > 0.0 ? (m.raw_activation - lo) / range : 0.0;
  }
}

LatentSlice select_top_activating(const Corpus& corpus, LatentId latent,
                                  const SelectionTarget& target) {
  if (latent >= corpus.dim()) {
    throw ValidationError("latent " + std::to_string(latent) +
                          " out of range for dim " +
                          std::to_string(corpus.dim()));
  }
  std::vector<std::pair<double, std::size_t>> active;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const double a = activation_of(corpus.entries()[i].vector, latent);
    if (a > 0.0) active.emplace_back(a, i);
  }
  if (active.empty()) {
    throw ValidationError("no item activates latent " + std::to_string(latent));
  }
  const std::size_t take = std::min(target.resolve(corpus.size()), active.size());
  auto by_rank = [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  };
  std::partial_sort(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(take),
                    active.end(), by_rank);

  LatentSlice slice;
  slice.latent_id = latent;
  slice.source_size = corpus.size();
  slice.dim = corpus.dim();
  slice.members.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    const auto& e = corpus.entries()[active[r].second];
    slice.members.push_back({e.item, e.vector, active[r].first, 0.0});
  }
  normalize_activations(slice);
  return slice;
}

void save_slice(const LatentSlice& slice, const std::filesystem::path& path) {
  json members = json::array();
  for (const auto& m : slice.members) {
    members.push_back({{"id", m.item.id},
                       {"text", m.item.text},
                       {"indices", m.vector.indices()},
                       {"values", m.vector.values()},
                       {"raw_activation", m.raw_activation},
                       {"norm_activation", m.norm_activation}});
  }
  json doc = {{"latent_id", slice.latent_id},
              {"source_size", slice.source_size},
              {"dim", slice.dim},
              {"members", std::move(members)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write slice file " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

LatentSlice load_slice(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open slice file " + path.string());
  try {
    const json doc = json::parse(in);
    LatentSlice slice;
    slice.latent_id = doc.at("latent_id").get<LatentId>();
    slice.source_size = doc.at("source_size").get<std::size_t>();
    slice.dim = doc.at("dim").get<std::size_t>();
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& m : doc.at("members")) {
      SliceMember member;
      member.item = {m.at("id").get<std::string>(), m.at("text").get<std::string>()};
      member.vector = ActivationVector(m.at("indices").get<std::vector<LatentId>>(),
                                       m.at("values").get<std::vector<double>>(),
                                       slice.dim);
      member.raw_activation = m.at("raw_activation").get<double>();
      member.norm_activation = m.at("norm_activation").get<double>();
      if (!(member.raw_activation > 0.0) || member.raw_activation > prev) {
        throw ValidationError("slice members must have positive, non-increasing activations");
      }
      prev = member.raw_activation;
      slice.members.push_back(std::move(member));
    }
    if (slice.members.empty()) throw ValidationError("slice has no members");
    return slice;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace vista::corpus
