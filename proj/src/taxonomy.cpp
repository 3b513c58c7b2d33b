#include "c2f/taxonomy.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "c2f/error.hpp"

namespace c2f {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

bool skip_line(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

[[noreturn]] void fail(const std::string& module, const std::string& source, std::size_t line_no,
                       const std::string& what) {
  throw Error(module, source + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

Taxonomy Taxonomy::from_records(std::span<const Record> records) {
  Taxonomy t;
  std::unordered_map<std::string, CoarseId> coarse_by_name;
  std::unordered_map<std::string, FineId> fine_by_name;

  for (const Record& r : records) {
    if (r.coarse.empty()) throw Error("taxonomy", "empty coarse surface name");
    auto [it, inserted] = coarse_by_name.try_emplace(r.coarse, coarse_id(t.coarse_.size()));
    if (inserted) t.coarse_.push_back(CoarseLabel{it->second, r.coarse, {}});
    if (r.fine.empty()) continue;

    if (auto prev = fine_by_name.find(r.fine); prev != fine_by_name.end()) {
      const CoarseLabel& first = t.coarse_[index(t.fine_[index(prev->second)].parent)];
      if (first.id != it->second) {
        throw Error("taxonomy", "fine label '" + r.fine + "' has two parents: '" + first.surface_name +
                                    "' and '" + r.coarse + "'");
      }
      throw Error("taxonomy", "duplicate fine surface name '" + r.fine + "'");
    }
    const FineId fid = fine_id(t.fine_.size());
    fine_by_name.emplace(r.fine, fid);
    t.fine_.push_back(FineLabel{fid, r.fine, r.gloss, it->second});
    t.coarse_[index(it->second)].children.push_back(fid);
  }

  if (t.coarse_.empty()) throw Error("taxonomy", "taxonomy has no labels");
  for (const CoarseLabel& c : t.coarse_) {
    if (c.children.empty()) {
      throw Error("taxonomy", "coarse label '" + c.surface_name + "' has an empty children list");
    }
  }
  return t;
}

const FineLabel& Taxonomy::fine(FineId id) const {
  if (index(id) >= fine_.size()) throw Error("taxonomy", "fine id out of range");
  return fine_[index(id)];
}

const CoarseLabel& Taxonomy::coarse(CoarseId id) const {
  if (index(id) >= coarse_.size()) throw Error("taxonomy", "coarse id out of range");
  return coarse_[index(id)];
}

std::vector<FineId> Taxonomy::non_candidates(CoarseId c) const {
  std::vector<FineId> out;
  for (const FineLabel& f : fine_) {
    if (f.parent != c) out.push_back(f.id);
  }
  return out;
}

std::vector<CoarseId> Taxonomy::other_coarse(CoarseId c) const {
  std::vector<CoarseId> out;
  for (const CoarseLabel& k : coarse_) {
    if (k.id != c) out.push_back(k.id);
  }
  return out;
}

std::optional<FineId> Taxonomy::find_fine(std::string_view surface_name) const {
  for (const FineLabel& f : fine_) {
    if (f.surface_name == surface_name) return f.id;
  }
  return std::nullopt;
}

std::optional<CoarseId> Taxonomy::find_coarse(std::string_view surface_name) const {
  for (const CoarseLabel& c : coarse_) {
    if (c.surface_name == surface_name) return c.id;
  }
  return std::nullopt;
}

Taxonomy parse_taxonomy(std::istream& in, const std::string& source) {
  std::vector<Taxonomy::Record> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto fields = split_tabs(trim(line));
    if (fields.size() > 3) fail("taxonomy", source, line_no, "expected at most 3 tab-separated fields");
    Taxonomy::Record r;
    r.coarse = std::string(trim(fields[0]));
    if (fields.size() >= 2) r.fine = std::string(trim(fields[1]));
    if (fields.size() == 3 && !trim(fields[2]).empty()) r.gloss = std::string(trim(fields[2]));
    if (r.coarse.empty()) fail("taxonomy", source, line_no, "empty coarse surface name");
    records.push_back(std::move(r));
  }
  try {
    return Taxonomy::from_records(records);
  } catch (const Error& e) {
    throw Error("taxonomy", source + ": " + e.what());
  }
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("taxonomy", "cannot open taxonomy file " + path.string());
  return parse_taxonomy(in, path.string());
}

void write_taxonomy(std::ostream& out, const Taxonomy& taxonomy) {
  for (const CoarseLabel& c : taxonomy.coarse_labels()) {
    for (FineId f : c.children) {
      const FineLabel& fl = taxonomy.fine(f);
      out << c.surface_name << '\t' << fl.surface_name;
      if (fl.gloss) out << '\t' << *fl.gloss;
      out << '\n';
    }
  }
}

std::optional<FineId> state_label(const LabelState& state) {
  return std::visit(
      [](const auto& s) -> std::optional<FineId> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Unlabeled>) {
          return std::nullopt;
        } else {
          return s.label;
        }
      },
      state);
}

LoadedCorpus parse_corpus(std::istream& in, const Taxonomy& taxonomy, const std::string& source) {
  LoadedCorpus out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    const auto fields = split_tabs(view);
    if (fields.size() < 3 || fields.size() > 4) {
      fail("corpus", source, line_no, "expected 3 or 4 tab-separated fields (id, coarse, text[, gold])");
    }

    Passage p;
    const std::string_view id_field = trim(fields[0]);
    const auto [ptr, ec] = std::from_chars(id_field.data(), id_field.data() + id_field.size(), p.id);
    if (ec != std::errc{} || ptr != id_field.data() + id_field.size()) {
      fail("corpus", source, line_no, "passage id '" + std::string(id_field) + "' is not an unsigned integer");
    }
    const auto coarse = taxonomy.find_coarse(trim(fields[1]));
    if (!coarse) fail("corpus", source, line_no, "unknown coarse label '" + std::string(trim(fields[1])) + "'");
    p.coarse = *coarse;
    p.text = std::string(fields[2]);

    std::optional<FineId> gold;
    if (fields.size() == 4 && !trim(fields[3]).empty()) {
      gold = taxonomy.find_fine(trim(fields[3]));
      if (!gold) fail("corpus", source, line_no, "unknown gold fine label '" + std::string(trim(fields[3])) + "'");
      if (taxonomy.fine(*gold).parent != p.coarse) {
        fail("corpus", source, line_no, "gold fine label '" + std::string(trim(fields[3])) +
                                            "' is not a child of '" + std::string(trim(fields[1])) + "'");
      }
    }
    out.passages.push_back(std::move(p));
    out.gold.push_back(gold);
  }
  return out;
}

LoadedCorpus load_corpus(const std::filesystem::path& path, const Taxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) throw Error("corpus", "cannot open corpus file " + path.string());
  return parse_corpus(in, taxonomy, path.string());
}

void write_corpus(std::ostream& out, const Corpus& corpus, const GoldLabels& gold, const Taxonomy& taxonomy) {
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Passage& p = corpus[i];
    out << p.id << '\t' << taxonomy.coarse(p.coarse).surface_name << '\t' << p.text;
    if (i < gold.size() && gold[i]) out << '\t' << taxonomy.fine(*gold[i]).surface_name;
    out << '\n';
  }
}

}  // namespace c2f
