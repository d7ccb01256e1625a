#include "qdml/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "text_format.hpp"

namespace qdml {
namespace {

using detail::parse_number;
using detail::split_ws;

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  // Next non-blank line split into tokens; false at end of input.
  bool next(std::vector<std::string_view>& tokens) {
    while (std::getline(is_, line_)) {
      ++line_no_;
      tokens = split_ws(line_);
      if (!tokens.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::kParse, "line " + std::to_string(line_no_) + ": " + what);
  }

  template <typename T>
  T number(std::string_view tok, const char* what) const {
    auto v = parse_number<T>(tok);
    if (!v) error(std::string("malformed ") + what + " '" + std::string(tok) + "'");
    return *v;
  }

  void expect(std::string_view tok, std::string_view want) const {
    if (tok != want) {
      error("expected '" + std::string(want) + "', found '" + std::string(tok) + "'");
    }
  }

 private:
  std::istream& is_;
  std::string line_;
  std::size_t line_no_ = 0;
};

void write_row(std::string& line, std::int64_t id, int coarse, int fine,
               std::span<const double> values) {
  line.clear();
  line += std::to_string(id);
  line += ' ';
  line += std::to_string(coarse);
  line += ' ';
  line += std::to_string(fine);
  for (double v : values) {
    line += ' ';
    detail::append_double(line, v);
  }
  line += '\n';
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

void Dataset::validate() const {
  hierarchy.validate();
  require(input_dim >= 1, ErrorCode::kInvalidArgument,
          "dataset input dimension must be positive");
  require(!samples.empty(), ErrorCode::kInvalidArgument, "dataset has no samples");
  for (const auto& s : samples) {
    require(s.x.size() == input_dim, ErrorCode::kInvalidArgument,
            "sample " + std::to_string(s.id) + " has dimension " +
                std::to_string(s.x.size()) + ", expected " +
                std::to_string(input_dim));
    if (!hierarchy.contains({s.coarse, s.fine})) {
      fail(ErrorCode::kInvalidArgument,
           "sample " + std::to_string(s.id) + " labels (coarse " +
               std::to_string(s.coarse) + ", fine " + std::to_string(s.fine) +
               ") are inconsistent with the label hierarchy");
    }
    for (double v : s.x) {
      require(std::isfinite(v), ErrorCode::kInvalidArgument,
              "sample " + std::to_string(s.id) + " has a non-finite value");
    }
  }
}

EmbeddingSet Dataset::as_embeddings() const {
  Vector values;
  values.reserve(samples.size() * input_dim);
  std::vector<ClassLabel> labels;
  std::vector<std::int64_t> ids;
  for (const auto& s : samples) {
    values.insert(values.end(), s.x.begin(), s.x.end());
    labels.push_back({s.coarse, s.fine});
    ids.push_back(s.id);
  }
  return EmbeddingSet(input_dim, std::move(values), std::move(labels),
                      std::move(ids));
}

void SyntheticSpec::validate() const {
  require(k1 >= 2, ErrorCode::kConfig, "synthetic spec needs at least 2 coarse classes");
  require(fines_per_coarse >= 1 && samples_per_fine >= 1 && input_dim >= 1,
          ErrorCode::kConfig, "synthetic spec counts must be at least 1");
  require(coarse_center_scale > 0.0 && fine_center_scale > 0.0 && noise_scale >= 0.0,
          ErrorCode::kConfig, "synthetic spec scales must be positive");
  require(signal_dim <= input_dim, ErrorCode::kConfig,
          "signal_dim cannot exceed input_dim");
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t n = spec.input_dim;
  const std::size_t active = spec.signal_dim == 0 ? n : spec.signal_dim;

  auto center_around = [&](const Vector& base, double scale) {
    Vector c = base;
    for (std::size_t j = 0; j < active; ++j) c[j] += scale * gauss(rng);
    return c;
  };

  Dataset d;
  d.input_dim = n;
  d.hierarchy.k1 = spec.k1;
  d.hierarchy.k2 = spec.k1 * spec.fines_per_coarse;
  d.hierarchy.parent.resize(static_cast<std::size_t>(d.hierarchy.k2));

  std::int64_t next_id = 0;
  const Vector origin(n, 0.0);
  for (int c = 0; c < spec.k1; ++c) {
    const Vector coarse_center = center_around(origin, spec.coarse_center_scale);
    for (int f = 0; f < spec.fines_per_coarse; ++f) {
      const int fine = c * spec.fines_per_coarse + f;
      d.hierarchy.parent[fine] = c;
      const Vector fine_center = center_around(coarse_center, spec.fine_center_scale);
      for (int s = 0; s < spec.samples_per_fine; ++s) {
        LabeledSample sample;
        sample.id = next_id++;
        sample.coarse = c;
        sample.fine = fine;
        sample.x = fine_center;
        for (double& v : sample.x) v += spec.noise_scale * gauss(rng);
        d.samples.push_back(std::move(sample));
      }
    }
  }
  return d;
}

ZeroShotSplit split_zero_shot(const Dataset& d, std::span<const int> ordered_fine,
                              std::size_t train_count) {
  const auto k2 = static_cast<std::size_t>(d.hierarchy.k2);
  require(train_count >= 1 && train_count < k2, ErrorCode::kInvalidArgument,
          "zero-shot split needs 1 <= train_count < k2 (got " +
              std::to_string(train_count) + ", k2 = " + std::to_string(k2) + ")");
  require(ordered_fine.size() == k2, ErrorCode::kInvalidArgument,
          "fine-id ordering must list every fine class once");
  std::set<int> seen;
  for (int f : ordered_fine) {
    require(f >= 0 && static_cast<std::size_t>(f) < k2 && seen.insert(f).second,
            ErrorCode::kInvalidArgument,
            "fine-id ordering must be a permutation of [0, k2)");
  }
  ZeroShotSplit split;
  split.train_fine.assign(ordered_fine.begin(), ordered_fine.begin() + train_count);
  split.test_fine.assign(ordered_fine.begin() + train_count, ordered_fine.end());
  return split;
}

ZeroShotSplit split_zero_shot(const Dataset& d, std::size_t train_count) {
  std::vector<int> order(static_cast<std::size_t>(std::max(d.hierarchy.k2, 0)));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  return split_zero_shot(d, order, train_count);
}

std::vector<int> round_robin_fine_order(const LabelHierarchy& h) {
  std::vector<std::vector<int>> children(static_cast<std::size_t>(std::max(h.k1, 0)));
  for (int f = 0; f < h.k2; ++f) children.at(static_cast<std::size_t>(h.parent.at(f))).push_back(f);
  std::vector<int> order;
  for (std::size_t round = 0; order.size() < static_cast<std::size_t>(h.k2); ++round) {
    for (const auto& c : children) {
      if (round < c.size()) order.push_back(c[round]);
    }
  }
  return order;
}

Dataset subset_by_fine(const Dataset& d, std::span<const int> fine_ids) {
  const std::set<int> keep(fine_ids.begin(), fine_ids.end());
  Dataset out;
  out.input_dim = d.input_dim;
  out.hierarchy = d.hierarchy;
  for (const auto& s : d.samples) {
    if (keep.count(s.fine)) out.samples.push_back(s);
  }
  return out;
}

void write_dataset(std::ostream& os, const Dataset& d) {
  os << "qdml-dataset 1\n";
  os << "n " << d.input_dim << " k1 " << d.hierarchy.k1 << " k2 "
     << d.hierarchy.k2 << '\n';
  os << "parent";
  for (int p : d.hierarchy.parent) os << ' ' << p;
  os << '\n';
  std::string line;
  for (const auto& s : d.samples) {
    write_row(line, s.id, s.coarse, s.fine, s.x);
    os << line;
  }
}

Dataset read_dataset(std::istream& is) {
  LineReader in(is);
  std::vector<std::string_view> tok;
  if (!in.next(tok)) fail(ErrorCode::kParse, "empty dataset file");
  if (tok.size() != 2 || tok[0] != "qdml-dataset" || tok[1] != "1") {
    in.error("expected header 'qdml-dataset 1'");
  }
  if (!in.next(tok) || tok.size() != 6) in.error("expected 'n <n> k1 <k1> k2 <k2>'");
  in.expect(tok[0], "n");
  in.expect(tok[2], "k1");
  in.expect(tok[4], "k2");
  Dataset d;
  d.input_dim = in.number<std::size_t>(tok[1], "n");
  d.hierarchy.k1 = in.number<int>(tok[3], "k1");
  d.hierarchy.k2 = in.number<int>(tok[5], "k2");
  if (!in.next(tok)) in.error("missing parent map");
  in.expect(tok[0], "parent");
  for (std::size_t i = 1; i < tok.size(); ++i) {
    d.hierarchy.parent.push_back(in.number<int>(tok[i], "parent id"));
  }
  try {
    d.hierarchy.validate();
  } catch (const Error& e) {
    in.error(e.what());
  }

  while (in.next(tok)) {
    if (tok.size() != 3 + d.input_dim) {
      in.error("sample record has " + std::to_string(tok.size()) +
               " fields, expected " + std::to_string(3 + d.input_dim));
    }
    LabeledSample s;
    s.id = in.number<std::int64_t>(tok[0], "sample id");
    s.coarse = in.number<int>(tok[1], "coarse id");
    s.fine = in.number<int>(tok[2], "fine id");
    if (!d.hierarchy.contains({s.coarse, s.fine})) {
      in.error("sample " + std::to_string(s.id) + " has labels (coarse " +
               std::to_string(s.coarse) + ", fine " + std::to_string(s.fine) +
               ") not in the hierarchy");
    }
    s.x.resize(d.input_dim);
    for (std::size_t j = 0; j < d.input_dim; ++j) {
      s.x[j] = in.number<double>(tok[3 + j], "feature value");
    }
    d.samples.push_back(std::move(s));
  }
  if (d.samples.empty()) fail(ErrorCode::kParse, "dataset file has no samples");
  try {
    d.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kParse, e.what());
  }
  return d;
}

void save_dataset(const std::string& path, const Dataset& d) {
  auto out = open_out(path);
  write_dataset(out, d);
  if (!out) fail(ErrorCode::kIo, "failed writing '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

void write_embeddings(std::ostream& os, const EmbeddingSet& s) {
  os << "qdml-embeddings 1\n";
  os << "N " << s.size() << " k " << s.dim() << '\n';
  std::string line;
  for (std::size_t i = 0; i < s.size(); ++i) {
    write_row(line, s.id(i), s.coarse(i), s.fine(i), s.row(i));
    os << line;
  }
}

EmbeddingSet read_embeddings(std::istream& is) {
  LineReader in(is);
  std::vector<std::string_view> tok;
  if (!in.next(tok)) fail(ErrorCode::kParse, "empty embeddings file");
  if (tok.size() != 2 || tok[0] != "qdml-embeddings" || tok[1] != "1") {
    in.error("expected header 'qdml-embeddings 1'");
  }
  if (!in.next(tok) || tok.size() != 4) in.error("expected 'N <N> k <k>'");
  in.expect(tok[0], "N");
  in.expect(tok[2], "k");
  const auto n = in.number<std::size_t>(tok[1], "N");
  const auto k = in.number<std::size_t>(tok[3], "k");
  if (n == 0 || k == 0) in.error("N and k must be positive");

  Vector values;
  values.reserve(n * k);
  std::vector<ClassLabel> labels;
  std::vector<std::int64_t> ids;
  while (in.next(tok)) {
    if (labels.size() == n) in.error("more rows than the declared N");
    if (tok.size() != 3 + k) {
      in.error("embedding row has " + std::to_string(tok.size() - std::min<std::size_t>(tok.size(), 3)) +
               " values, expected " + std::to_string(k));
    }
    ids.push_back(in.number<std::int64_t>(tok[0], "row id"));
    const int coarse = in.number<int>(tok[1], "coarse id");
    const int fine = in.number<int>(tok[2], "fine id");
    if (coarse < 0 || fine < 0) in.error("class ids must be nonnegative");
    labels.push_back({coarse, fine});
    for (std::size_t j = 0; j < k; ++j) {
      const double v = in.number<double>(tok[3 + j], "embedding value");
      if (!std::isfinite(v)) in.error("non-finite embedding value");
      values.push_back(v);
    }
  }
  if (labels.size() != n) {
    fail(ErrorCode::kParse, "embeddings file declares " + std::to_string(n) +
                                " rows but contains " + std::to_string(labels.size()));
  }
  return EmbeddingSet(k, std::move(values), std::move(labels), std::move(ids));
}

void save_embeddings(const std::string& path, const EmbeddingSet& s) {
  auto out = open_out(path);
  write_embeddings(out, s);
  if (!out) fail(ErrorCode::kIo, "failed writing '" + path + "'");
}

EmbeddingSet load_embeddings(const std::string& path) {
  auto in = open_in(path);
  return read_embeddings(in);
}

}  // namespace qdml
