#include "pgrec/movielens.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace pgrec {

namespace {

const char* kMl100kGenres[19] = {
    "unknown",   "Action",  "Adventure", "Animation", "Children's", "Comedy",  "Crime",
    "Documentary", "Drama", "Fantasy",   "Film-Noir", "Horror",     "Musical", "Mystery",
    "Romance",   "Sci-Fi",  "Thriller",  "War",       "Western"};

const char* kMl1mOccupations[21] = {
    "other",       "academic/educator",  "artist",        "clerical/admin", "college/grad student",
    "customer service", "doctor/health care", "executive/managerial", "farmer", "homemaker",
    "K-12 student", "lawyer",            "programmer",    "retired",        "sales/marketing",
    "scientist",   "self-employed",      "technician/engineer", "tradesman/craftsman", "unemployed",
    "writer"};

std::vector<std::string> split_on(const std::string& line, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

std::int64_t parse_int(const std::string& s, const std::string& file, std::size_t lineno) {
  std::int64_t v = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  require(ec == std::errc() && ptr == end,
          file + " line " + std::to_string(lineno) + ": expected an integer, got \"" + s + "\"");
  return v;
}

std::string strip_cr(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
  return s;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path);
  return in;
}

struct RawRating {
  std::int64_t user;
  std::int64_t item;
  int value;
};

// Year from a "(1995)" suffix, or 0 when absent.
int year_from_title(const std::string& title) {
  const std::size_t close = title.rfind(')');
  if (close == std::string::npos || close < 5) return 0;
  const std::size_t open = title.rfind('(', close);
  if (open == std::string::npos || close - open != 5) return 0;
  int year = 0;
  for (std::size_t i = open + 1; i < close; ++i) {
    if (title[i] < '0' || title[i] > '9') return 0;
    year = year * 10 + (title[i] - '0');
  }
  return year;
}

// Year from a "01-Jan-1995" field, or 0 when absent.
int year_from_date(const std::string& date) {
  const std::size_t dash = date.rfind('-');
  if (dash == std::string::npos || dash + 1 >= date.size()) return 0;
  int year = 0;
  for (std::size_t i = dash + 1; i < date.size(); ++i) {
    if (date[i] < '0' || date[i] > '9') return 0;
    year = year * 10 + (date[i] - '0');
  }
  return year;
}

}  // namespace

void RatingStore::reindex() {
  std::sort(ratings.begin(), ratings.end(), [](const Rating& a, const Rating& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  user_ptr.assign(n_users + 1, 0);
  for (const Rating& r : ratings) user_ptr[r.user + 1]++;
  for (int u = 0; u < n_users; ++u) user_ptr[u + 1] += user_ptr[u];
}

std::string categorize_age(int age) {
  require(age > 0, "categorize_age: age must be positive");
  if (age < 18) return "teenager";
  if (age < 25) return "young";
  if (age < 35) return "adult";
  if (age < 50) return "middle-aged";
  return "senior";
}

std::string categorize_decade(int year) {
  require(year >= 1900 && year <= 2100, "categorize_decade: year out of range");
  const int decade = year / 10 * 10;
  if (decade < 2000) return std::to_string(decade % 100) + "s";
  return std::to_string(decade) + "s";
}

Flavor flavor_from_name(const std::string& name) {
  if (name == "100K" || name == "100k" || name == "ml100k" || name == "ml-100k")
    return Flavor::kMl100k;
  if (name == "1M" || name == "1m" || name == "ml1m" || name == "ml-1m") return Flavor::kMl1m;
  throw Error("unknown dataset flavor \"" + name + "\" (expected ml100k or ml1m)");
}

Dataset parse_movielens(const std::string& dir, Flavor flavor, DuplicatePolicy policy) {
  const bool is100k = flavor == Flavor::kMl100k;
  const std::string rating_file = dir + (is100k ? "/u.data" : "/ratings.dat");
  const std::string user_file = dir + (is100k ? "/u.user" : "/users.dat");
  const std::string item_file = dir + (is100k ? "/u.item" : "/movies.dat");
  const std::string rating_sep = is100k ? "\t" : "::";
  const std::string side_sep = is100k ? "|" : "::";

  // --- ratings ---
  std::vector<RawRating> raw;
  {
    std::ifstream in = open_or_throw(rating_file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_cr(line);
      if (line.empty()) continue;
      const auto fields = split_on(line, rating_sep);
      require(fields.size() == 4,
              rating_file + " line " + std::to_string(lineno) + ": expected 4 fields, got " +
                  std::to_string(fields.size()));
      RawRating r;
      r.user = parse_int(fields[0], rating_file, lineno);
      r.item = parse_int(fields[1], rating_file, lineno);
      r.value = static_cast<int>(parse_int(fields[2], rating_file, lineno));
      parse_int(fields[3], rating_file, lineno);  // timestamp, discarded
      require(r.value >= 1 && r.value <= 5, rating_file + " line " + std::to_string(lineno) +
                                                ": rating outside [1, 5]");
      raw.push_back(r);
    }
    require(!raw.empty(), rating_file + ": no ratings found");
  }

  // --- user side information ---
  struct RawUser {
    std::string age_category, gender, occupation;
  };
  std::map<std::int64_t, RawUser> raw_users;
  {
    std::ifstream in = open_or_throw(user_file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_cr(line);
      if (line.empty()) continue;
      const auto fields = split_on(line, side_sep);
      require(fields.size() >= 4, user_file + " line " + std::to_string(lineno) +
                                      ": expected at least 4 fields");
      RawUser u;
      std::int64_t id;
      if (is100k) {
        // id | age | gender | occupation | zip
        id = parse_int(fields[0], user_file, lineno);
        u.age_category = categorize_age(static_cast<int>(parse_int(fields[1], user_file, lineno)));
        u.gender = fields[2];
        u.occupation = fields[3];
      } else {
        // id :: gender :: age-code :: occupation-code :: zip
        id = parse_int(fields[0], user_file, lineno);
        u.gender = fields[1];
        // The age code is the lower bound of the band; the same table applies.
        u.age_category = categorize_age(static_cast<int>(parse_int(fields[2], user_file, lineno)));
        const std::int64_t occ = parse_int(fields[3], user_file, lineno);
        require(occ >= 0 && occ < 21,
                user_file + " line " + std::to_string(lineno) + ": occupation code out of range");
        u.occupation = kMl1mOccupations[occ];
      }
      raw_users[id] = std::move(u);
    }
  }

  // --- item side information ---
  struct RawItem {
    std::vector<std::string> genres;
    std::string decade;
  };
  std::map<std::int64_t, RawItem> raw_items;
  {
    std::ifstream in = open_or_throw(item_file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_cr(line);
      if (line.empty()) continue;
      const auto fields = split_on(line, side_sep);
      RawItem it;
      std::int64_t id;
      if (is100k) {
        // id | title | release date | video date | url | 19 genre flags
        require(fields.size() == 24, item_file + " line " + std::to_string(lineno) +
                                         ": expected 24 fields, got " +
                                         std::to_string(fields.size()));
        id = parse_int(fields[0], item_file, lineno);
        const int year = year_from_date(fields[2]);
        if (year != 0) it.decade = categorize_decade(year);
        for (int g = 0; g < 19; ++g) {
          const std::int64_t flag = parse_int(fields[5 + g], item_file, lineno);
          require(flag == 0 || flag == 1,
                  item_file + " line " + std::to_string(lineno) + ": genre flag not 0/1");
          if (flag == 1) it.genres.push_back(kMl100kGenres[g]);
        }
      } else {
        // id :: title (year) :: genre|genre|...
        require(fields.size() == 3, item_file + " line " + std::to_string(lineno) +
                                        ": expected 3 fields, got " +
                                        std::to_string(fields.size()));
        id = parse_int(fields[0], item_file, lineno);
        const int year = year_from_title(fields[1]);
        if (year != 0) it.decade = categorize_decade(year);
        for (auto& g : split_on(fields[2], "|"))
          if (!g.empty()) it.genres.push_back(g);
      }
      if (it.genres.empty()) it.genres.push_back("unknown");
      raw_items[id] = std::move(it);
    }
  }

  // --- dense re-indexing over the union of ids seen anywhere ---
  std::vector<std::int64_t> user_ids, item_ids;
  {
    std::unordered_set<std::int64_t> useen, iseen;
    for (const auto& [id, _] : raw_users) useen.insert(id);
    for (const auto& [id, _] : raw_items) iseen.insert(id);
    for (const RawRating& r : raw) {
      useen.insert(r.user);
      iseen.insert(r.item);
    }
    user_ids.assign(useen.begin(), useen.end());
    item_ids.assign(iseen.begin(), iseen.end());
    std::sort(user_ids.begin(), user_ids.end());
    std::sort(item_ids.begin(), item_ids.end());
  }
  std::unordered_map<std::int64_t, int> user_index, item_index;
  for (std::size_t i = 0; i < user_ids.size(); ++i) user_index[user_ids[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < item_ids.size(); ++i) item_index[item_ids[i]] = static_cast<int>(i);

  Dataset out;
  out.store.n_users = static_cast<int>(user_ids.size());
  out.store.n_items = static_cast<int>(item_ids.size());
  out.store.orig_user_ids = user_ids;
  out.store.orig_item_ids = item_ids;

  std::unordered_set<std::int64_t> seen_pairs;
  seen_pairs.reserve(raw.size() * 2);
  for (const RawRating& r : raw) {
    const int u = user_index[r.user];
    const int i = item_index[r.item];
    const std::int64_t key = static_cast<std::int64_t>(u) * out.store.n_items + i;
    if (!seen_pairs.insert(key).second) {
      if (policy == DuplicatePolicy::kError)
        throw Error(rating_file + ": duplicate rating for user " + std::to_string(r.user) +
                    ", item " + std::to_string(r.item));
      out.duplicates_dropped++;
      continue;
    }
    out.store.ratings.push_back({u, i, static_cast<double>(r.value)});
  }
  out.store.reindex();

  out.users.reserve(raw_users.size());
  for (const auto& [id, u] : raw_users) {
    UserProfile p;
    p.user = user_index[id];
    p.age_category = u.age_category;
    p.gender = u.gender;
    p.occupation = u.occupation;
    out.users.push_back(std::move(p));
  }
  out.items.reserve(raw_items.size());
  for (const auto& [id, it] : raw_items) {
    ItemProfile p;
    p.item = item_index[id];
    p.genres = it.genres;
    p.decade = it.decade;
    out.items.push_back(std::move(p));
  }
  return out;
}

}  // namespace pgrec
