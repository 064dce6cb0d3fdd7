#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace recpipe::corpus {

/// One receipt. Item order is the in-receipt position.
struct Basket {
    std::string transaction_id;
    std::optional<std::string> user_id;
    std::vector<std::string> items;

    friend bool operator==(const Basket&, const Basket&) = default;
};

using Index = std::uint32_t;

/// A basket after vocabulary lookup.
struct EncodedBasket {
    std::optional<Index> user;
    std::vector<Index> items;

    friend bool operator==(const EncodedBasket&, const EncodedBasket&) = default;
};

enum class Format { jsonl, csv };

Format parse_format(const std::string& name);

/// Bidirectional token <-> dense index maps for products and users.
class Vocabulary {
public:
    std::size_t product_count() const { return product_tokens_.size(); }
    std::size_t user_count() const { return user_tokens_.size(); }

    std::optional<Index> product_index(const std::string& token) const;
    std::optional<Index> user_index(const std::string& token) const;
    const std::string& product_token(Index i) const { return product_tokens_.at(i); }
    const std::string& user_token(Index i) const { return user_tokens_.at(i); }
    std::uint64_t product_occurrences(Index i) const { return product_counts_.at(i); }
    std::uint64_t user_baskets(Index i) const { return user_counts_.at(i); }

    const std::vector<std::string>& product_tokens() const { return product_tokens_; }
    const std::vector<std::string>& user_tokens() const { return user_tokens_; }
    const std::vector<std::uint64_t>& product_counts() const { return product_counts_; }
    const std::vector<std::uint64_t>& user_counts() const { return user_counts_; }

    std::uint64_t min_count() const { return min_count_; }

    Index add_product(const std::string& token, std::uint64_t count);
    Index add_user(const std::string& token, std::uint64_t count);
    void set_min_count(std::uint64_t m) { min_count_ = m; }

    /// Stable fingerprint of both token lists.
    std::uint64_t fingerprint() const;

private:
    std::unordered_map<std::string, Index> product_index_;
    std::vector<std::string> product_tokens_;
    std::vector<std::uint64_t> product_counts_;
    std::unordered_map<std::string, Index> user_index_;
    std::vector<std::string> user_tokens_;
    std::vector<std::uint64_t> user_counts_;
    std::uint64_t min_count_ = 1;
};

std::vector<Basket> parse_transactions(std::istream& in, Format format);
std::vector<Basket> parse_transactions(const std::string& path, Format format);

void write_jsonl(std::ostream& out, const std::vector<Basket>& baskets);

/// Drops baskets with fewer than two items; order preserved.
std::vector<Basket> filter_trainable(const std::vector<Basket>& baskets);

/// Indices by first appearance. Products below min_count are left out.
/// Users are indexed without a threshold; their count is the number of baskets.
Vocabulary build_vocabulary(const std::vector<Basket>& baskets, std::uint64_t min_count = 1);

struct EncodeStats {
    std::size_t dropped_items = 0;
    std::size_t dropped_baskets = 0;
};

/// Unknown products are dropped (or rejected when strict); baskets left with
/// fewer than two items are removed. Unknown users become anonymous.
std::vector<EncodedBasket> encode_baskets(const std::vector<Basket>& baskets,
                                          const Vocabulary& vocab,
                                          bool strict = false,
                                          EncodeStats* stats = nullptr);

std::vector<std::string> decode_items(const EncodedBasket& basket, const Vocabulary& vocab);

// Token table text file: "<token> <index> <count>" per line, in index order.
// Products and users are stored in separate files.
void save_token_table(std::ostream& out, const std::vector<std::string>& tokens,
                      const std::vector<std::uint64_t>& counts);
void save_vocabulary(const std::string& products_path, const std::string& users_path,
                     const Vocabulary& vocab);
Vocabulary load_vocabulary(std::istream& products, std::istream& users);
Vocabulary load_vocabulary(const std::string& products_path, const std::string& users_path);

// Encoded corpus text file: one basket per line, "<user index or -> <item> <item> ...".
void save_encoded(std::ostream& out, const std::vector<EncodedBasket>& baskets);
std::vector<EncodedBasket> load_encoded(std::istream& in);
void save_encoded(const std::string& path, const std::vector<EncodedBasket>& baskets);
std::vector<EncodedBasket> load_encoded(const std::string& path);

}  // namespace recpipe::corpus
