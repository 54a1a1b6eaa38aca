#include "cfx/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cfx/errors.hpp"
#include "cfx/rng.hpp"

namespace cfx {

namespace {

uint64_t pack_pair(int32_t user, int32_t item) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(user)) << 32) |
           static_cast<uint32_t>(item);
}

bool parse_i64(std::string_view text, int64_t& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

bool parse_f32(std::string_view text, float& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
    std::vector<std::string_view> fields;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace

InteractionStore::InteractionStore(std::vector<Interaction> rows, int32_t num_users,
                                   int32_t num_items, float rating_min, float rating_max)
    : rows_(std::move(rows)),
      num_users_(num_users),
      num_items_(num_items),
      rating_min_(rating_min),
      rating_max_(rating_max) {
    if (num_users_ < 0 || num_items_ < 0) {
        fail(ErrorCode::InvalidArgument, "negative entity counts");
    }
    std::unordered_set<uint64_t> seen;
    seen.reserve(rows_.size() * 2);
    for (const Interaction& row : rows_) {
        if (row.user < 0 || row.user >= num_users_ || row.item < 0 || row.item >= num_items_) {
            fail(ErrorCode::InvalidId, "interaction (" + std::to_string(row.user) + "," +
                                           std::to_string(row.item) + ") outside declared counts");
        }
        if (!seen.insert(pack_pair(row.user, row.item)).second) {
            fail(ErrorCode::InvalidArgument, "duplicate (user,item) pair (" +
                                                 std::to_string(row.user) + "," +
                                                 std::to_string(row.item) + ")");
        }
    }
    build_user_index();
}

InteractionStore::InteractionStore(Trusted, std::vector<Interaction> rows, int32_t num_users,
                                   int32_t num_items, float rating_min, float rating_max)
    : rows_(std::move(rows)),
      num_users_(num_users),
      num_items_(num_items),
      rating_min_(rating_min),
      rating_max_(rating_max) {
    build_user_index();
}

void InteractionStore::build_user_index() {
    rows_by_user_.assign(static_cast<size_t>(num_users_), {});
    for (size_t i = 0; i < rows_.size(); ++i) {
        rows_by_user_[static_cast<size_t>(rows_[i].user)].push_back(static_cast<int32_t>(i));
    }
}

std::vector<int32_t> InteractionStore::user_history(int32_t user) const {
    std::vector<int32_t> items;
    if (user < 0 || user >= num_users_) return items;
    const auto& rows = rows_by_user_[static_cast<size_t>(user)];
    items.reserve(rows.size());
    for (int32_t idx : rows) items.push_back(rows_[static_cast<size_t>(idx)].item);
    std::sort(items.begin(), items.end());
    return items;
}

const std::vector<int32_t>& InteractionStore::user_rows(int32_t user) const {
    static const std::vector<int32_t> kEmpty;
    if (user < 0 || user >= num_users_) return kEmpty;
    return rows_by_user_[static_cast<size_t>(user)];
}

InteractionStore InteractionStore::masked_view(const DeletionMask& mask) const {
    if (mask.is_null()) {
        return InteractionStore(Trusted{}, rows_, num_users_, num_items_, rating_min_, rating_max_);
    }
    if (mask.user < 0 || mask.user >= num_users_) {
        fail(ErrorCode::InvalidMask, "mask user " + std::to_string(mask.user) + " out of range");
    }
    std::vector<int32_t> history = user_history(mask.user);
    std::unordered_set<int32_t> drop;
    drop.reserve(mask.items.size() * 2);
    for (int32_t item : mask.items) {
        if (!std::binary_search(history.begin(), history.end(), item)) {
            fail(ErrorCode::InvalidMask, "item " + std::to_string(item) + " not in history of user " +
                                             std::to_string(mask.user));
        }
        drop.insert(item);
    }
    std::vector<Interaction> kept;
    kept.reserve(rows_.size() - drop.size());
    for (const Interaction& row : rows_) {
        if (row.user == mask.user && drop.count(row.item) != 0) continue;
        kept.push_back(row);
    }
    return InteractionStore(Trusted{}, std::move(kept), num_users_, num_items_, rating_min_,
                            rating_max_);
}

std::pair<InteractionStore, InteractionStore> InteractionStore::split(double train_fraction,
                                                                      uint64_t seed) const {
    if (!(train_fraction > 0.0) || train_fraction > 1.0) {
        fail(ErrorCode::InvalidArgument,
             "train_fraction must be in (0,1], got " + format_double(train_fraction));
    }
    const size_t n = rows_.size();
    const size_t n_train = static_cast<size_t>(
        std::llround(train_fraction * static_cast<double>(n)));
    std::vector<uint32_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);
    Rng rng(derive_seed(seed, 0x51u));
    rng.shuffle(order);
    std::vector<bool> in_train(n, false);
    for (size_t i = 0; i < n_train && i < n; ++i) in_train[order[i]] = true;
    std::vector<Interaction> train_rows, test_rows;
    train_rows.reserve(n_train);
    test_rows.reserve(n - std::min(n_train, n));
    for (size_t i = 0; i < n; ++i) {
        (in_train[i] ? train_rows : test_rows).push_back(rows_[i]);
    }
    return {InteractionStore(Trusted{}, std::move(train_rows), num_users_, num_items_, rating_min_,
                             rating_max_),
            InteractionStore(Trusted{}, std::move(test_rows), num_users_, num_items_, rating_min_,
                             rating_max_)};
}

uint64_t InteractionStore::content_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ULL;
    };
    mix(static_cast<uint64_t>(num_users_));
    mix(static_cast<uint64_t>(num_items_));
    uint32_t fmin, fmax;
    static_assert(sizeof(float) == 4);
    std::memcpy(&fmin, &rating_min_, 4);
    std::memcpy(&fmax, &rating_max_, 4);
    mix(fmin);
    mix(fmax);
    for (const Interaction& row : rows_) {
        uint32_t bits;
        std::memcpy(&bits, &row.rating, 4);
        mix(pack_pair(row.user, row.item));
        mix(bits);
    }
    return h;
}

IngestResult load_interactions(const std::string& path, DatasetFormat format) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);

    const char sep = format == DatasetFormat::MovielensTsv ? '\t' : ',';
    std::vector<Interaction> rows;
    std::vector<int64_t> user_ids, item_ids;
    std::unordered_map<int64_t, int32_t> user_map, item_map;
    std::unordered_set<uint64_t> seen_pairs;
    float rmin = 0.0f, rmax = 0.0f;
    bool any = false;

    std::string raw;
    size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = strip_cr(raw);
        if (line.empty()) continue;
        auto fields = split_fields(line, sep);

        // triples-csv may carry a header row.
        if (format == DatasetFormat::TriplesCsv && line_no == 1 && !fields.empty()) {
            int64_t probe;
            if (!parse_i64(fields[0], probe)) continue;
        }

        size_t expected_min = 3;
        size_t expected_max = format == DatasetFormat::MovielensTsv ? 4 : 3;
        if (fields.size() < expected_min || fields.size() > expected_max) {
            fail(ErrorCode::ParseError,
                 path + " line " + std::to_string(line_no) + ": expected " +
                     (format == DatasetFormat::MovielensTsv ? "user<TAB>item<TAB>rating[<TAB>timestamp]"
                                                            : "user,item,rating"));
        }
        int64_t orig_user, orig_item;
        float rating;
        if (!parse_i64(fields[0], orig_user) || !parse_i64(fields[1], orig_item) ||
            !parse_f32(fields[2], rating)) {
            fail(ErrorCode::ParseError,
                 path + " line " + std::to_string(line_no) + ": malformed row '" +
                     std::string(line) + "'");
        }

        auto [uit, u_new] = user_map.try_emplace(orig_user, static_cast<int32_t>(user_ids.size()));
        if (u_new) user_ids.push_back(orig_user);
        auto [iit, i_new] = item_map.try_emplace(orig_item, static_cast<int32_t>(item_ids.size()));
        if (i_new) item_ids.push_back(orig_item);

        int32_t u = uit->second;
        int32_t i = iit->second;
        if (!seen_pairs.insert(pack_pair(u, i)).second) {
            fail(ErrorCode::ParseError, path + " line " + std::to_string(line_no) +
                                            ": duplicate (user,item) pair (" +
                                            std::to_string(orig_user) + "," +
                                            std::to_string(orig_item) + ")");
        }
        rows.push_back({u, i, rating});
        if (!any) {
            rmin = rmax = rating;
            any = true;
        } else {
            rmin = std::min(rmin, rating);
            rmax = std::max(rmax, rating);
        }
    }
    if (rows.empty()) fail(ErrorCode::EmptyInput, path + " contains no interactions");

    InteractionStore store(std::move(rows), static_cast<int32_t>(user_ids.size()),
                           static_cast<int32_t>(item_ids.size()), rmin, rmax);
    return IngestResult{std::move(store), std::move(user_ids), std::move(item_ids)};
}

std::pair<InteractionStore, InteractionStore> split(const InteractionStore& store,
                                                    double train_fraction, uint64_t seed) {
    return store.split(train_fraction, seed);
}

void save_id_map(const std::string& path, const std::vector<int64_t>& original_ids) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    out << "original_id,dense_id\n";
    for (size_t dense = 0; dense < original_ids.size(); ++dense) {
        out << original_ids[dense] << ',' << dense << '\n';
    }
}

void save_triples_csv(const std::string& path, const InteractionStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path);
    out << "user,item,rating\n";
    for (const Interaction& row : store.interactions()) {
        out << row.user << ',' << row.item << ',' << format_double(row.rating) << '\n';
    }
}

InteractionStore load_dense_triples(const std::string& path, int32_t num_users, int32_t num_items,
                                    float rating_min, float rating_max) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    std::vector<Interaction> rows;
    std::string raw;
    size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = strip_cr(raw);
        if (line.empty()) continue;
        auto fields = split_fields(line, ',');
        if (line_no == 1 && !fields.empty()) {
            int64_t probe;
            if (!parse_i64(fields[0], probe)) continue;
        }
        int64_t u, i;
        float r;
        if (fields.size() != 3 || !parse_i64(fields[0], u) || !parse_i64(fields[1], i) ||
            !parse_f32(fields[2], r)) {
            fail(ErrorCode::ParseError, path + " line " + std::to_string(line_no) + ": malformed row");
        }
        rows.push_back({static_cast<int32_t>(u), static_cast<int32_t>(i), r});
    }
    return InteractionStore(std::move(rows), num_users, num_items, rating_min, rating_max);
}

}  // namespace cfx
