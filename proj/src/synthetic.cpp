#include "pgrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "pgrec/error.hpp"
#include "pgrec/rng.hpp"

namespace pgrec {

namespace {

constexpr int kLatent = 24;

const char* kOccupations[21] = {
    "administrator", "artist",    "doctor",  "educator", "engineer",  "entertainment",
    "executive",     "healthcare", "homemaker", "lawyer", "librarian", "marketing",
    "none",          "other",     "programmer", "retired", "salesman", "scientist",
    "student",       "technician", "writer"};

const char* kMonths[12] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                           "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

struct Vec {
  double c[kLatent] = {0};
  void add(const Vec& o, double s) {
    for (int i = 0; i < kLatent; ++i) c[i] += s * o.c[i];
  }
  double dot(const Vec& o) const {
    double acc = 0;
    for (int i = 0; i < kLatent; ++i) acc += c[i] * o.c[i];
    return acc;
  }
  void normalize() {
    const double n = std::sqrt(dot(*this));
    if (n > 0)
      for (double& x : c) x /= n;
  }
};

Vec random_unit(Rng& rng) {
  Vec v;
  for (double& x : v.c) x = rng.normal();
  v.normalize();
  return v;
}

}  // namespace

SyntheticSpec mini_spec() {
  SyntheticSpec s;
  s.users = 30;
  s.items = 24;
  s.rows = 540;
  s.duplicate_rows = 0;
  s.min_ratings = 16;
  s.seed = 1234;
  return s;
}

SyntheticSpec standin_spec() { return SyntheticSpec{}; }

void write_synthetic_dataset(const std::string& dir, const SyntheticSpec& spec) {
  require(spec.users >= 2 && spec.items >= 4, "write_synthetic_dataset: too small");
  require(spec.rows >= static_cast<long long>(spec.users) * spec.min_ratings,
          "write_synthetic_dataset: rows below the per-user minimum");
  std::filesystem::create_directories(dir);
  Rng rng(derive_seed(spec.seed, "synthetic"));

  // Latent directions and scalar quality effects for every attribute value.
  std::vector<Vec> genre_dir(19), decade_dir(12), age_dir(5), gender_dir(2), occ_dir(21);
  for (auto* dirs : {&genre_dir, &decade_dir, &age_dir, &gender_dir, &occ_dir})
    for (Vec& v : *dirs) v = random_unit(rng);
  std::vector<double> genre_quality(19), decade_quality(12);
  for (double& q : genre_quality) q = rng.normal();
  for (double& q : decade_quality) q = rng.normal();

  // --- items: genres, release year, latent factor, popularity ---
  struct Item {
    std::vector<int> genres;
    int year = 0;
    Vec q;
    double bias = 0;
    double popularity = 0;
  };
  std::vector<Item> items(spec.items);
  for (int i = 0; i < spec.items; ++i) {
    Item& it = items[i];
    // Primary genre sampled with a skewed mass, occasional extras.
    const int g1 = 1 + static_cast<int>(std::min<double>(17.0, std::floor(18.0 * std::pow(rng.uniform(), 1.7))));
    it.genres.push_back(g1);
    if (rng.uniform() < 0.55) {
      const int g2 = 1 + static_cast<int>(rng.next_below(18));
      if (g2 != g1) it.genres.push_back(g2);
    }
    if (rng.uniform() < 0.15) {
      const int g3 = 1 + static_cast<int>(rng.next_below(18));
      if (std::find(it.genres.begin(), it.genres.end(), g3) == it.genres.end())
        it.genres.push_back(g3);
    }
    std::sort(it.genres.begin(), it.genres.end());
    const double u = rng.uniform();
    if (u < 0.78) it.year = 1990 + static_cast<int>(rng.next_below(9));
    else if (u < 0.93) it.year = 1970 + static_cast<int>(rng.next_below(20));
    else it.year = 1930 + static_cast<int>(rng.next_below(40));

    Vec content;
    for (int g : it.genres) content.add(genre_dir[g], 1.0 / it.genres.size());
    content.add(decade_dir[(it.year - 1920) / 10 % 12], 0.45);
    content.normalize();
    const Vec noise = random_unit(rng);
    it.q.add(content, 0.80);
    it.q.add(noise, 0.62);
    double quality = 0.0;
    for (int g : it.genres) quality += genre_quality[g] / it.genres.size();
    quality = (quality + 0.5 * decade_quality[(it.year - 1920) / 10 % 12]) / std::sqrt(1.25);
    it.bias = 0.50 * quality + 0.34 * rng.normal();
    it.popularity = std::pow(1.0 + static_cast<double>(rng.next_below(spec.items)), -0.62);
  }

  // --- users: demographics, latent factor ---
  struct User {
    int age = 0;
    int gender = 0;  // 0 = M, 1 = F
    int occupation = 0;
    Vec p;
    double bias = 0;
    int count = 0;
  };
  std::vector<User> users(spec.users);
  for (int u = 0; u < spec.users; ++u) {
    User& us = users[u];
    const double a = rng.uniform();
    if (a < 0.06) us.age = 10 + static_cast<int>(rng.next_below(8));
    else if (a < 0.33) us.age = 18 + static_cast<int>(rng.next_below(7));
    else if (a < 0.68) us.age = 25 + static_cast<int>(rng.next_below(10));
    else if (a < 0.90) us.age = 35 + static_cast<int>(rng.next_below(15));
    else us.age = 50 + static_cast<int>(rng.next_below(20));
    us.gender = rng.uniform() < 0.71 ? 0 : 1;
    us.occupation = static_cast<int>(std::min<double>(20.0, std::floor(21.0 * std::pow(rng.uniform(), 1.4))));

    const int age_band = us.age < 18 ? 0 : us.age < 25 ? 1 : us.age < 35 ? 2 : us.age < 50 ? 3 : 4;
    Vec demo;
    demo.add(age_dir[age_band], 1.0);
    demo.add(gender_dir[us.gender], 1.0);
    demo.add(occ_dir[us.occupation], 1.0);
    demo.normalize();
    Vec noise = random_unit(rng);
    us.p.add(demo, 0.72);
    us.p.add(noise, 0.70);
    us.bias = 0.35 * rng.normal();
  }

  // --- per-user rating counts summing exactly to rows - duplicate_rows ---
  const long long unique_rows = spec.rows - spec.duplicate_rows;
  {
    std::vector<double> w(spec.users);
    double wsum = 0;
    for (double& x : w) {
      x = std::exp(1.1 * rng.normal());
      wsum += x;
    }
    const long long extra = unique_rows - static_cast<long long>(spec.users) * spec.min_ratings;
    long long assigned = 0;
    const int cap = std::min(spec.items, spec.min_ratings + 700);
    for (int u = 0; u < spec.users; ++u) {
      const long long want = static_cast<long long>(std::floor(extra * w[u] / wsum));
      users[u].count = spec.min_ratings + static_cast<int>(want);
      users[u].count = std::min(users[u].count, cap);
      assigned += users[u].count;
    }
    // Distribute the rounding remainder deterministically.
    long long rem = unique_rows - assigned;
    require(rem >= 0, "write_synthetic_dataset: count overflow");
    int u = 0;
    while (rem > 0) {
      if (users[u].count < cap) {
        users[u].count++;
        rem--;
      }
      u = (u + 1) % spec.users;
    }
  }

  // --- ratings: popularity+taste weighted sampling without replacement ---
  struct Row {
    int user, item, value;
    long long ts;
  };
  std::vector<Row> rows;
  rows.reserve(spec.rows);
  std::vector<std::pair<double, int>> keys(spec.items);
  for (int u = 0; u < spec.users; ++u) {
    const User& us = users[u];
    for (int i = 0; i < spec.items; ++i) {
      const double affinity = us.p.dot(items[i].q);
      const double w = items[i].popularity * std::exp(0.9 * affinity);
      // Weighted reservoir key; the largest `count` keys win.
      keys[i] = {std::pow(rng.uniform_pos(), 1.0 / w), i};
    }
    std::partial_sort(keys.begin(), keys.begin() + us.count, keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < us.count; ++k) {
      const Item& it = items[keys[k].second];
      const double score =
          3.55 + us.bias + it.bias + 1.35 * us.p.dot(it.q) + 0.45 * rng.normal();
      const int rating = std::max(1, std::min(5, static_cast<int>(std::lround(score))));
      rows.push_back({u, keys[k].second, rating,
                      874000000LL + static_cast<long long>(rng.next_below(20000000ULL))});
    }
  }
  require(static_cast<long long>(rows.size()) == unique_rows,
          "write_synthetic_dataset: internal count mismatch");

  for (int d = 0; d < spec.duplicate_rows; ++d) {
    Row copy = rows[rng.next_below(rows.size())];
    copy.ts += 1;
    rows.push_back(copy);
  }
  rng.shuffle(rows);

  // --- write the three files ---
  {
    std::ofstream out(dir + "/u.data");
    require(out.good(), "cannot write " + dir + "/u.data");
    for (const Row& r : rows)
      out << (r.user + 1) << '\t' << (r.item + 1) << '\t' << r.value << '\t' << r.ts << '\n';
  }
  {
    std::ofstream out(dir + "/u.user");
    require(out.good(), "cannot write " + dir + "/u.user");
    for (int u = 0; u < spec.users; ++u) {
      char zip[8];
      std::snprintf(zip, sizeof zip, "%05d", static_cast<int>(rng.next_below(99999)));
      out << (u + 1) << '|' << users[u].age << '|' << (users[u].gender == 0 ? 'M' : 'F') << '|'
          << kOccupations[users[u].occupation] << '|' << zip << '\n';
    }
  }
  {
    std::ofstream out(dir + "/u.item");
    require(out.good(), "cannot write " + dir + "/u.item");
    for (int i = 0; i < spec.items; ++i) {
      const Item& it = items[i];
      const int day = 1 + static_cast<int>(rng.next_below(28));
      const char* month = kMonths[rng.next_below(12)];
      out << (i + 1) << "|Feature " << (i + 1) << " (" << it.year << ")|";
      char date[16];
      std::snprintf(date, sizeof date, "%02d-%s-%d", day, month, it.year);
      out << date << "||http://example.invalid/" << (i + 1) << "|";
      for (int g = 0; g < 19; ++g) {
        const bool on = std::find(it.genres.begin(), it.genres.end(), g) != it.genres.end();
        out << (on ? 1 : 0) << (g + 1 < 19 ? "|" : "");
      }
      out << '\n';
    }
  }
}

}  // namespace pgrec
