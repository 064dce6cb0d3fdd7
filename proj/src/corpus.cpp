#include "recpipe/corpus.hpp"

#include "recpipe/error.hpp"
#include "recpipe/numkit.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace recpipe::corpus {

using json = nlohmann::json;

Format parse_format(const std::string& name) {
    if (name == "jsonl") {
        return Format::jsonl;
    }
    if (name == "csv") {
        return Format::csv;
    }
    throw UserError("unknown transaction format '" + name + "' (expected jsonl or csv)");
}

std::optional<Index> Vocabulary::product_index(const std::string& token) const {
    auto it = product_index_.find(token);
    if (it == product_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<Index> Vocabulary::user_index(const std::string& token) const {
    auto it = user_index_.find(token);
    if (it == user_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

Index Vocabulary::add_product(const std::string& token, std::uint64_t count) {
    const auto idx = static_cast<Index>(product_tokens_.size());
    if (!product_index_.emplace(token, idx).second) {
        throw UserError("duplicate product token '" + token + "'");
    }
    product_tokens_.push_back(token);
    product_counts_.push_back(count);
    return idx;
}

Index Vocabulary::add_user(const std::string& token, std::uint64_t count) {
    const auto idx = static_cast<Index>(user_tokens_.size());
    if (!user_index_.emplace(token, idx).second) {
        throw UserError("duplicate user token '" + token + "'");
    }
    user_tokens_.push_back(token);
    user_counts_.push_back(count);
    return idx;
}

std::uint64_t Vocabulary::fingerprint() const {
    std::uint64_t h = numkit::fnv1a("products");
    for (const auto& t : product_tokens_) {
        h = numkit::fnv1a(t, h);
        h = numkit::fnv1a("\n", h);
    }
    h = numkit::fnv1a("users", h);
    for (const auto& t : user_tokens_) {
        h = numkit::fnv1a(t, h);
        h = numkit::fnv1a("\n", h);
    }
    return h;
}

namespace {

std::vector<Basket> parse_jsonl(std::istream& in) {
    std::vector<Basket> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error&) {
            throw ParseError(lineno, "not valid JSON");
        }
        if (!rec.is_object()) {
            throw ParseError(lineno, "expected a JSON object");
        }
        Basket b;
        auto tx = rec.find("tx");
        if (tx == rec.end() || !tx->is_string()) {
            throw ParseError(lineno, "missing string field \"tx\"");
        }
        b.transaction_id = tx->get<std::string>();
        if (auto user = rec.find("user"); user != rec.end() && !user->is_null()) {
            if (!user->is_string()) {
                throw ParseError(lineno, "field \"user\" must be a string");
            }
            b.user_id = user->get<std::string>();
        }
        auto items = rec.find("items");
        if (items == rec.end() || !items->is_array()) {
            throw ParseError(lineno, "missing array field \"items\"");
        }
        for (const auto& item : *items) {
            if (!item.is_string()) {
                throw ParseError(lineno, "items must be strings");
            }
            b.items.push_back(item.get<std::string>());
        }
        if (b.items.empty()) {
            throw ParseError(lineno, "basket has no items");
        }
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::vector<Basket> parse_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        return {};
    }
    ++lineno;
    const auto header = split_csv(line);
    const std::vector<std::string> expected{"transaction_id", "user_id", "product", "position"};
    if (header != expected) {
        throw ParseError(lineno, "expected header transaction_id,user_id,product,position");
    }

    struct Pending {
        Basket basket;
        std::vector<std::pair<long long, std::size_t>> order;  // (position, arrival)
    };
    std::vector<Pending> pending;
    std::unordered_map<std::string, std::size_t> by_tx;

    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto f = split_csv(line);
        if (f.size() != 4) {
            throw ParseError(lineno, "expected 4 fields, got " + std::to_string(f.size()));
        }
        if (f[0].empty() || f[2].empty()) {
            throw ParseError(lineno, "empty transaction_id or product");
        }
        long long pos = 0;
        try {
            std::size_t used = 0;
            pos = std::stoll(f[3], &used);
            if (used != f[3].size() || pos < 0) {
                throw std::invalid_argument("position");
            }
        } catch (const std::exception&) {
            throw ParseError(lineno, "position must be a non-negative integer");
        }
        auto [it, fresh] = by_tx.emplace(f[0], pending.size());
        if (fresh) {
            Pending p;
            p.basket.transaction_id = f[0];
            if (!f[1].empty()) {
                p.basket.user_id = f[1];
            }
            pending.push_back(std::move(p));
        }
        auto& p = pending[it->second];
        const std::optional<std::string> user = f[1].empty() ? std::nullopt : std::optional(f[1]);
        if (user != p.basket.user_id) {
            throw ParseError(lineno, "conflicting user_id for transaction " + f[0]);
        }
        p.order.emplace_back(pos, p.basket.items.size());
        p.basket.items.push_back(f[2]);
    }

    std::vector<Basket> out;
    out.reserve(pending.size());
    for (auto& p : pending) {
        std::stable_sort(p.order.begin(), p.order.end());
        Basket b;
        b.transaction_id = std::move(p.basket.transaction_id);
        b.user_id = std::move(p.basket.user_id);
        for (const auto& [pos, arrival] : p.order) {
            b.items.push_back(p.basket.items[arrival]);
        }
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace

std::vector<Basket> parse_transactions(std::istream& in, Format format) {
    return format == Format::jsonl ? parse_jsonl(in) : parse_csv(in);
}

std::vector<Basket> parse_transactions(const std::string& path, Format format) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open transactions file " + path);
    }
    return parse_transactions(in, format);
}

void write_jsonl(std::ostream& out, const std::vector<Basket>& baskets) {
    for (const auto& b : baskets) {
        json rec;
        rec["tx"] = b.transaction_id;
        if (b.user_id) {
            rec["user"] = *b.user_id;
        }
        rec["items"] = b.items;
        out << rec.dump() << '\n';
    }
}

std::vector<Basket> filter_trainable(const std::vector<Basket>& baskets) {
    std::vector<Basket> out;
    std::copy_if(baskets.begin(), baskets.end(), std::back_inserter(out),
                 [](const Basket& b) { return b.items.size() >= 2; });
    return out;
}

Vocabulary build_vocabulary(const std::vector<Basket>& baskets, std::uint64_t min_count) {
    if (baskets.empty()) {
        throw UserError("empty vocabulary: no baskets");
    }
    std::vector<std::string> order;
    std::unordered_map<std::string, std::uint64_t> counts;
    std::vector<std::string> user_order;
    std::unordered_map<std::string, std::uint64_t> user_counts;
    for (const auto& b : baskets) {
        for (const auto& item : b.items) {
            if (counts[item]++ == 0) {
                order.push_back(item);
            }
        }
        if (b.user_id) {
            if (user_counts[*b.user_id]++ == 0) {
                user_order.push_back(*b.user_id);
            }
        }
    }
    Vocabulary vocab;
    vocab.set_min_count(min_count);
    for (const auto& token : order) {
        if (counts[token] >= min_count) {
            vocab.add_product(token, counts[token]);
        }
    }
    if (vocab.product_count() == 0) {
        throw UserError("empty vocabulary: no product reaches min_count " + std::to_string(min_count));
    }
    for (const auto& token : user_order) {
        vocab.add_user(token, user_counts[token]);
    }
    return vocab;
}

std::vector<EncodedBasket> encode_baskets(const std::vector<Basket>& baskets,
                                          const Vocabulary& vocab,
                                          bool strict,
                                          EncodeStats* stats) {
    std::vector<EncodedBasket> out;
    EncodeStats local;
    for (const auto& b : baskets) {
        EncodedBasket e;
        if (b.user_id) {
            e.user = vocab.user_index(*b.user_id);
        }
        for (const auto& item : b.items) {
            if (auto idx = vocab.product_index(item)) {
                e.items.push_back(*idx);
            } else if (strict) {
                throw UserError("unknown product token '" + item + "' in transaction " + b.transaction_id);
            } else {
                ++local.dropped_items;
            }
        }
        if (e.items.size() < 2) {
            ++local.dropped_baskets;
            continue;
        }
        out.push_back(std::move(e));
    }
    if (local.dropped_items > 0) {
        std::clog << "warning: dropped " << local.dropped_items << " out-of-vocabulary item(s)\n";
    }
    if (stats) {
        *stats = local;
    }
    return out;
}

std::vector<std::string> decode_items(const EncodedBasket& basket, const Vocabulary& vocab) {
    std::vector<std::string> out;
    out.reserve(basket.items.size());
    for (auto i : basket.items) {
        out.push_back(vocab.product_token(i));
    }
    return out;
}

void save_token_table(std::ostream& out, const std::vector<std::string>& tokens,
                      const std::vector<std::uint64_t>& counts) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].find_first_of(" \t\n\r") != std::string::npos) {
            throw UserError("token '" + tokens[i] + "' contains whitespace and cannot be persisted");
        }
        out << tokens[i] << ' ' << i << ' ' << counts[i] << '\n';
    }
}

namespace {

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    body(out);
}

template <typename Add>
void read_token_table(std::istream& in, Add add) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        std::string token;
        std::uint64_t index = 0;
        std::uint64_t count = 0;
        if (!(fields >> token >> index >> count)) {
            throw ParseError(lineno, "expected '<token> <index> <count>'");
        }
        const auto assigned = add(token, count);
        if (assigned != index) {
            throw ParseError(lineno, "indices must be dense and in order");
        }
    }
}

}  // namespace

void save_vocabulary(const std::string& products_path, const std::string& users_path,
                     const Vocabulary& vocab) {
    write_file(products_path, [&](std::ostream& out) {
        save_token_table(out, vocab.product_tokens(), vocab.product_counts());
    });
    write_file(users_path, [&](std::ostream& out) {
        save_token_table(out, vocab.user_tokens(), vocab.user_counts());
    });
}

Vocabulary load_vocabulary(std::istream& products, std::istream& users) {
    Vocabulary vocab;
    read_token_table(products, [&](const std::string& t, std::uint64_t c) { return vocab.add_product(t, c); });
    read_token_table(users, [&](const std::string& t, std::uint64_t c) { return vocab.add_user(t, c); });
    return vocab;
}

Vocabulary load_vocabulary(const std::string& products_path, const std::string& users_path) {
    std::ifstream products(products_path);
    if (!products) {
        throw IoError("cannot open " + products_path);
    }
    std::ifstream users(users_path);
    if (!users) {
        throw IoError("cannot open " + users_path);
    }
    return load_vocabulary(products, users);
}

void save_encoded(std::ostream& out, const std::vector<EncodedBasket>& baskets) {
    for (const auto& b : baskets) {
        if (b.user) {
            out << *b.user;
        } else {
            out << '-';
        }
        for (auto i : b.items) {
            out << ' ' << i;
        }
        out << '\n';
    }
}

std::vector<EncodedBasket> load_encoded(std::istream& in) {
    std::vector<EncodedBasket> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        std::string user;
        fields >> user;
        EncodedBasket b;
        if (user != "-") {
            try {
                b.user = static_cast<Index>(std::stoul(user));
            } catch (const std::exception&) {
                throw ParseError(lineno, "bad user index '" + user + "'");
            }
        }
        Index item = 0;
        while (fields >> item) {
            b.items.push_back(item);
        }
        if (!fields.eof() || b.items.size() < 2) {
            throw ParseError(lineno, "expected at least two integer item ids");
        }
        out.push_back(std::move(b));
    }
    return out;
}

void save_encoded(const std::string& path, const std::vector<EncodedBasket>& baskets) {
    write_file(path, [&](std::ostream& out) { save_encoded(out, baskets); });
}

std::vector<EncodedBasket> load_encoded(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open encoded corpus " + path);
    }
    return load_encoded(in);
}

}  // namespace recpipe::corpus
