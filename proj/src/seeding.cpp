#include <algorithm>
#include <cstdint>

#include "c2f/error.hpp"
#include "c2f/taxonomy.hpp"

namespace c2f {
namespace {

bool is_token_byte(unsigned char ch) {
  return (ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || ch >= 0x80;
}

char lower(unsigned char ch) { return (ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : static_cast<char>(ch); }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char ch : text) {
    if (is_token_byte(ch)) {
      current.push_back(lower(ch));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

bool contains_phrase(std::span<const std::string> tokens, std::span<const std::string> phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return false;
  const auto it = std::search(tokens.begin(), tokens.end(), phrase.begin(), phrase.end());
  return it != tokens.end();
}

std::size_t seed_weak_supervision(Corpus& corpus, const Taxonomy& taxonomy, ExclusiveScope scope) {
  std::vector<std::vector<std::string>> names;
  names.reserve(taxonomy.fine_count());
  for (const FineLabel& f : taxonomy.fine_labels()) names.push_back(tokenize(f.surface_name));

  std::size_t seeds = 0;
  for (Passage& p : corpus) {
    if (!std::holds_alternative<Unlabeled>(p.state) && !std::holds_alternative<WeakSeed>(p.state)) {
      throw Error("seeding", "passage " + std::to_string(p.id) + " already carries a bootstrapped label");
    }
    const auto tokens = tokenize(p.text);

    std::optional<FineId> match;
    bool exclusive = true;
    for (FineId f : taxonomy.candidates(p.coarse)) {
      if (!contains_phrase(tokens, names[index(f)])) continue;
      if (match) {
        exclusive = false;
        break;
      }
      match = f;
    }
    if (match && exclusive && scope == ExclusiveScope::all) {
      for (const FineLabel& f : taxonomy.fine_labels()) {
        if (f.parent == p.coarse) continue;
        if (contains_phrase(tokens, names[index(f.id)])) {
          exclusive = false;
          break;
        }
      }
    }

    if (match && exclusive) {
      p.state = WeakSeed{*match};
      p.weak_seed = match;
      ++seeds;
    } else {
      p.state = Unlabeled{};
      p.weak_seed.reset();
    }
  }
  return seeds;
}

std::vector<SeedRatio> seed_ratios(const Corpus& corpus, const Taxonomy& taxonomy) {
  std::vector<SeedRatio> ratios(taxonomy.coarse_count());
  for (std::size_t c = 0; c < ratios.size(); ++c) ratios[c].coarse = coarse_id(c);
  for (const Passage& p : corpus) {
    SeedRatio& r = ratios[index(p.coarse)];
    ++r.total;
    if (p.weak_seed) ++r.seeds;
  }
  for (const SeedRatio& r : ratios) {
    if (r.total == 0) {
      throw Error("seeding", "coarse label '" + taxonomy.coarse(r.coarse).surface_name +
                                 "' has no passages; seed ratio is undefined");
    }
  }
  return ratios;
}

int select_r(std::span<const SeedRatio> ratios, std::span<const int> candidates) {
  constexpr std::size_t kMaxCount = std::size_t{1} << 31;
  if (candidates.empty()) throw Error("seeding", "empty r candidate set");
  if (ratios.empty()) throw Error("seeding", "no seed ratios to select r from");

  // Smallest ratio by cross-multiplication: a/b < c/d  <=>  a*d < c*b.
  const SeedRatio* smallest = nullptr;
  for (const SeedRatio& r : ratios) {
    if (r.total == 0) throw Error("seeding", "seed ratio with zero total");
    if (r.total > kMaxCount || r.seeds > r.total) throw Error("seeding", "seed ratio counts out of range");
    if (smallest == nullptr || static_cast<std::uint64_t>(r.seeds) * smallest->total <
                                   static_cast<std::uint64_t>(smallest->seeds) * r.total) {
      smallest = &r;
    }
  }

  // |c - 100*W/I| compared as |c*I - 100*W| over the common denominator I.
  const auto distance = [&](int c) {
    const std::int64_t lhs = static_cast<std::int64_t>(c) * static_cast<std::int64_t>(smallest->total);
    const std::int64_t rhs = std::int64_t{100} * static_cast<std::int64_t>(smallest->seeds);
    return lhs > rhs ? lhs - rhs : rhs - lhs;
  };
  int best = candidates.front();
  std::int64_t best_distance = distance(best);
  for (int c : candidates.subspan(1)) {
    const std::int64_t d = distance(c);
    if (d < best_distance || (d == best_distance && c < best)) {
      best = c;
      best_distance = d;
    }
  }
  return best;
}

}  // namespace c2f
