#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "szo/chunking.hpp"
#include "szo/errors.hpp"
#include "szo/instance.hpp"
#include "szo/metrics.hpp"
#include "szo/optimizer.hpp"
#include "szo/sparse_vector.hpp"
#include "szo/tasks.hpp"

namespace szo {

template <class T>
struct ParseResult {
  T items;
  std::vector<std::string> warnings;
};

enum class ParseMode { kStrict, kLenient };

namespace detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open `" + path + "` for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open `" + path + "` for writing");
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_fields(const std::string& line, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + sep.size();
  }
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": bad number `" + s + "`");
  }
}

inline unsigned long long parse_uint(const std::string& s, const std::string& where) {
  unsigned long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError(where + ": bad integer `" + s + "`");
  }
  return v;
}

inline std::string at_line(std::size_t lineno) { return "line " + std::to_string(lineno); }

}  // namespace detail

// ---------------------------------------------------------------------------
// CoNLL-2000: `word POS chunk` per line, blank line between sentences. Chunk
// tags B-NP / I-NP map to B / I; every other tag maps to O.

inline Chunk normalize_np_tag(const std::string& tag) {
  if (tag == "B-NP") return Chunk::B;
  if (tag == "I-NP") return Chunk::I;
  return Chunk::O;
}

inline ParseResult<std::vector<SequenceInstance>> parse_conll(std::istream& in,
                                                              ParseMode mode = ParseMode::kStrict) {
  ParseResult<std::vector<SequenceInstance>> res;
  std::vector<Token> tokens;
  std::vector<Chunk> tags;
  bool broken = false;
  std::size_t lineno = 0, sentence_start = 1;

  auto flush = [&]() {
    if (!tokens.empty() && !broken) {
      Chunk prev = Chunk::O;
      for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] == Chunk::I && prev == Chunk::O) {
          tags[i] = Chunk::B;
          res.warnings.push_back("sentence at line " + std::to_string(sentence_start) +
                                 ": I-NP after O at token " + std::to_string(i + 1) +
                                 " treated as B-NP");
        }
        prev = tags[i];
      }
      res.items.emplace_back(std::move(tokens), std::move(tags));
    }
    tokens.clear();
    tags.clear();
    broken = false;
  };

  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty()) {
      flush();
      sentence_start = lineno + 1;
      continue;
    }
    std::istringstream ls(t);
    std::vector<std::string> cols;
    for (std::string c; ls >> c;) cols.push_back(c);
    if (cols.size() != 3) {
      const std::string msg = detail::at_line(lineno) + ": expected 3 columns (word POS chunk), got " +
                              std::to_string(cols.size());
      if (mode == ParseMode::kStrict) throw DataError(msg);
      res.warnings.push_back(msg + "; sentence skipped");
      broken = true;
      continue;
    }
    tokens.push_back({cols[0], cols[1]});
    tags.push_back(normalize_np_tag(cols[2]));
  }
  flush();
  return res;
}

inline ParseResult<std::vector<SequenceInstance>> parse_conll(const std::string& path,
                                                              ParseMode mode = ParseMode::kStrict) {
  auto in = detail::open_in(path);
  return parse_conll(in, mode);
}

inline void write_conll(std::ostream& out, std::span<const SequenceInstance> sentences) {
  for (const auto& s : sentences) {
    const auto gold = SequenceFeedback::gold(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const char* tag = gold[i] == Chunk::B ? "B-NP" : gold[i] == Chunk::I ? "I-NP" : "O";
      out << s.tokens()[i].word << ' ' << s.tokens()[i].pos << ' ' << tag << '\n';
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// n-best lists: `id ||| hypothesis tokens ||| f1 ... fK ||| reference tokens`
// The reference field is required on the first line of each id block and
// ignored afterwards. Dense features become sparse vectors over [0, K).

struct NBestData {
  std::vector<Instance> instances;
  std::vector<std::vector<std::string>> references;
};

inline ParseResult<NBestData> parse_nbest(std::istream& in) {
  ParseResult<NBestData> res;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> arity;

  std::string cur_id;
  std::vector<Candidate> cands;
  std::vector<double> losses;
  std::vector<std::string> ref;
  std::size_t block_arity = 0;
  std::map<std::string, bool> seen;

  auto flush = [&]() {
    if (cands.empty()) return;
    res.items.instances.emplace_back(cur_id, std::move(cands), std::move(losses));
    res.items.references.push_back(std::move(ref));
    cands.clear();
    losses.clear();
    ref.clear();
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto where = detail::at_line(lineno);
    const auto fields = detail::split_fields(line, "|||");
    if (fields.size() < 3 || fields.size() > 4) {
      throw DataError(where + ": expected `id ||| tokens ||| features [||| reference]`");
    }
    const std::string& id = fields[0];
    std::vector<double> feats;
    {
      std::istringstream fs(fields[2]);
      for (std::string f; fs >> f;) feats.push_back(detail::parse_double(f, where));
    }
    if (feats.empty()) throw DataError(where + ": no features");
    for (double f : feats) {
      if (!std::isfinite(f)) throw DataError(where + ": non-finite feature");
    }
    if (id != cur_id || cands.empty()) {
      flush();
      if (seen.count(id)) throw DataError(where + ": id `" + id + "` is not contiguous");
      seen[id] = true;
      cur_id = id;
      if (fields.size() < 4 || detail::trim(fields[3]).empty()) {
        throw DataError(where + ": first line of id `" + id + "` lacks the reference");
      }
      ref = tokenize(fields[3]);
      block_arity = feats.size();
      if (arity && *arity != block_arity) {
        throw DataError(where + ": id `" + id + "` has " + std::to_string(block_arity) +
                        " features, earlier ids have " + std::to_string(*arity));
      }
      arity = block_arity;
    } else if (feats.size() != block_arity) {
      throw DataError(where + ": feature arity mismatch within id `" + id + "` (" +
                      std::to_string(feats.size()) + " vs " + std::to_string(block_arity) + ")");
    }
    const auto hyp = tokenize(fields[1]);
    double loss = 1.0 - sentence_bleu_smoothed(hyp, ref);
    if (clamp_loss(loss)) res.warnings.push_back(where + ": loss clamped into [0, 1]");
    cands.push_back({fields[1], SparseVector::from_dense(feats)});
    losses.push_back(loss);
  }
  flush();
  return res;
}

inline ParseResult<NBestData> parse_nbest(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_nbest(in);
}

// ---------------------------------------------------------------------------
// Sparse documents: header `classes=<C> vocab=<V>`, then one document per
// line as `class<TAB>i:v i:v ...`. A repeated index keeps its last value.

struct DocHeader {
  std::size_t classes = 0;
  Index vocab = 0;
};

inline ParseResult<std::vector<Instance>> parse_docs(std::istream& in, DocHeader* header_out = nullptr) {
  ParseResult<std::vector<Instance>> res;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw DataError("document file: missing header");
  ++lineno;
  DocHeader h;
  {
    std::istringstream hs(detail::trim(line));
    std::string a, b;
    hs >> a >> b;
    if (a.rfind("classes=", 0) != 0 || b.rfind("vocab=", 0) != 0) {
      throw DataError("document file: header must be `classes=<C> vocab=<V>`");
    }
    h.classes = detail::parse_uint(a.substr(8), "header");
    const auto v = detail::parse_uint(b.substr(6), "header");
    if (h.classes < 2) throw DataError("document file: need at least 2 classes");
    if (v == 0 || v > kMaxDim) throw DataError("document file: bad vocabulary size");
    h.vocab = static_cast<Index>(v);
  }
  if (header_out) *header_out = h;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto where = detail::at_line(lineno);
    const auto tab = t.find('\t');
    const std::string cls = t.substr(0, tab);
    const auto gold = detail::parse_uint(cls, where);
    if (gold >= h.classes) {
      throw DataError(where + ": class " + cls + " >= classes=" + std::to_string(h.classes));
    }
    std::map<Index, double> entries;
    if (tab != std::string::npos) {
      std::istringstream ls(t.substr(tab + 1));
      for (std::string tok; ls >> tok;) {
        const auto colon = tok.find(':');
        if (colon == std::string::npos) throw DataError(where + ": expected i:v, got `" + tok + "`");
        const auto i = detail::parse_uint(tok.substr(0, colon), where);
        if (i >= h.vocab) {
          throw DataError(where + ": index " + std::to_string(i) + " >= vocab=" +
                          std::to_string(h.vocab));
        }
        const double v = detail::parse_double(tok.substr(colon + 1), where);
        if (!std::isfinite(v)) throw DataError(where + ": non-finite weight");
        const auto idx = static_cast<Index>(i);
        if (entries.count(idx)) {
          res.warnings.push_back(where + ": duplicate index " + std::to_string(i) +
                                 ", keeping the last value");
        }
        entries[idx] = v;
      }
    }
    std::vector<std::pair<Index, double>> pairs(entries.begin(), entries.end());
    const auto doc = SparseVector::from_pairs(h.vocab, std::move(pairs));
    res.items.push_back(multiclass_instance(doc, h.classes, gold, std::to_string(res.items.size())));
  }
  return res;
}

inline ParseResult<std::vector<Instance>> parse_docs(const std::string& path,
                                                     DocHeader* header_out = nullptr) {
  auto in = detail::open_in(path);
  return parse_docs(in, header_out);
}

// ---------------------------------------------------------------------------
// Run logs (CSV) and checkpoints

inline constexpr const char* kRunLogHeader = "iter,loss,avg_cum_loss,nbar,dev_metric";

inline void write_runlog(const RunLog& log, std::ostream& out) {
  out << kRunLogHeader << '\n';
  for (const auto& r : log.rows) {
    out << r.iter << ',' << format_double(r.loss) << ',' << format_double(r.avg_cum_loss) << ','
        << r.nbar << ',';
    if (r.dev_metric) out << format_double(*r.dev_metric);
    out << '\n';
  }
}

inline void write_runlog(const RunLog& log, const std::string& path) {
  auto out = detail::open_out(path);
  write_runlog(log, out);
}

inline RunLog read_runlog(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kRunLogHeader) {
    throw DataError("run log: header must be `" + std::string(kRunLogHeader) + "`");
  }
  RunLog log;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto where = "run log " + detail::at_line(lineno);
    const auto f = detail::split_fields(line, ",");
    if (f.size() != 5) throw DataError(where + ": expected 5 columns");
    LogRow r;
    r.iter = detail::parse_uint(f[0], where);
    r.loss = detail::parse_double(f[1], where);
    r.avg_cum_loss = detail::parse_double(f[2], where);
    r.nbar = detail::parse_uint(f[3], where);
    if (!f[4].empty()) r.dev_metric = detail::parse_double(f[4], where);
    log.rows.push_back(r);
  }
  return log;
}

inline RunLog read_runlog(const std::string& path) {
  auto in = detail::open_in(path);
  return read_runlog(in);
}

inline void write_checkpoint(const SparseVector& w, std::ostream& out) {
  write_vectors(out, w.dim(), std::span<const SparseVector>(&w, 1));
}

inline void write_checkpoint(const SparseVector& w, const std::string& path) {
  auto out = detail::open_out(path);
  write_checkpoint(w, out);
}

inline SparseVector read_checkpoint(std::istream& in) {
  auto v = read_vectors(in);
  if (v.size() != 1) throw DataError("checkpoint: expected exactly one weight vector");
  return std::move(v.front());
}

inline SparseVector read_checkpoint(const std::string& path) {
  auto in = detail::open_in(path);
  return read_checkpoint(in);
}

/// Feature registry: one name per line, line number = index.
inline void write_features(const FeatureIndex& fi, std::ostream& out) {
  for (const auto& n : fi.names()) out << n << '\n';
}

inline FeatureIndex read_features(std::istream& in) {
  std::vector<std::string> names;
  for (std::string line; std::getline(in, line);) names.push_back(line);
  return FeatureIndex::from_names(std::move(names));
}

}  // namespace szo
