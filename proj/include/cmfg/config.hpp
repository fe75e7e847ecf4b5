#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmfg {

// Malformed or incomplete configuration; the message names the block and key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Reading or writing a file failed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Plain-text config made of named blocks:
//
//   grid {
//     nx = 41        # comment
//     lengths = 1.0, 1.0
//   }
//
// Lists are comma separated (brackets optional); groups of lists are
// separated by ';'. Every value read through a getter is recorded, together
// with the defaults that were applied, and resolved() prints that record in
// canonical form. Reading the resolved text back yields the same run.
class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "<config>");
    static Config load(const std::string& path);  // throws IoError when unreadable

    bool has_block(const std::string& block) const;
    void require_block(const std::string& block) const;
    bool has(const std::string& block, const std::string& key) const;

    double number(const std::string& block, const std::string& key) const;
    double number(const std::string& block, const std::string& key, double fallback) const;
    int integer(const std::string& block, const std::string& key) const;
    int integer(const std::string& block, const std::string& key, int fallback) const;
    std::uint64_t unsigned_integer(const std::string& block, const std::string& key, std::uint64_t fallback) const;
    std::string text(const std::string& block, const std::string& key) const;
    std::string text(const std::string& block, const std::string& key, const std::string& fallback) const;
    bool flag(const std::string& block, const std::string& key, bool fallback) const;
    std::vector<double> numbers(const std::string& block, const std::string& key) const;
    std::vector<double> numbers(const std::string& block, const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::vector<double>> groups(const std::string& block, const std::string& key,
                                            const std::vector<std::vector<double>>& fallback) const;
    std::optional<std::array<double, 4>> box(const std::string& block, const std::string& key, int dim) const;

    // Throws ConfigError naming the first key no getter asked for.
    void check_consumed() const;

    std::string resolved() const;

private:
    using Block = std::map<std::string, std::string>;
    const std::string* raw(const std::string& block, const std::string& key) const;
    void record(const std::string& block, const std::string& key, const std::string& value) const;
    [[noreturn]] void fail(const std::string& block, const std::string& key, const std::string& what) const;

    std::string origin_;
    std::map<std::string, Block> blocks_;
    mutable std::map<std::string, Block> used_;
};

// FNV-1a over the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

// Fixed significant-digit scientific notation used in every CSV.
std::string format_sci(double x);
// Shortest text that reads back to the same double.
std::string format_exact(double x);

}  // namespace cmfg
