#include "cmfg/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cmfg {
namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

std::optional<double> to_double(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    double v = 0.0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::string strip_brackets(std::string s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
    return s;
}

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_exact(v[i]);
    return out;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
    Config c;
    c.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::optional<std::string> current;
    int lineno = 0;
    auto error = [&](const std::string& what) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line == "}") {
            if (!current) error("unmatched '}'");
            current.reset();
            continue;
        }
        if (line.back() == '{') {
            if (current) error("nested block inside '" + *current + "'");
            const std::string name = trim(line.substr(0, line.size() - 1));
            if (!valid_name(name)) error("bad block name '" + name + "'");
            if (c.blocks_.count(name)) error("duplicate block '" + name + "'");
            c.blocks_[name];
            current = name;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) error("expected 'key = value'");
        if (!current) error("key outside of a block");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!valid_name(key)) error("bad key '" + key + "'");
        if (value.empty()) error("empty value for '" + key + "'");
        auto& block = c.blocks_[*current];
        if (block.count(key)) error("duplicate key '" + *current + "." + key + "'");
        block[key] = value;
    }
    if (current) throw ConfigError(origin + ": block '" + *current + "' is not closed");
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return parse(s.str(), path);
}

bool Config::has_block(const std::string& block) const { return blocks_.count(block) > 0; }

void Config::require_block(const std::string& block) const {
    if (!has_block(block)) throw ConfigError(origin_ + ": missing block '" + block + "'");
}

bool Config::has(const std::string& block, const std::string& key) const { return raw(block, key) != nullptr; }

const std::string* Config::raw(const std::string& block, const std::string& key) const {
    const auto b = blocks_.find(block);
    if (b == blocks_.end()) return nullptr;
    const auto k = b->second.find(key);
    return k == b->second.end() ? nullptr : &k->second;
}

void Config::record(const std::string& block, const std::string& key, const std::string& value) const {
    used_[block][key] = value;
}

void Config::fail(const std::string& block, const std::string& key, const std::string& what) const {
    throw ConfigError(origin_ + ": " + block + "." + key + ": " + what);
}

double Config::number(const std::string& block, const std::string& key) const {
    require_block(block);
    const auto* r = raw(block, key);
    if (!r) fail(block, key, "missing key");
    const auto v = to_double(*r);
    if (!v) fail(block, key, "not a number: '" + *r + "'");
    record(block, key, format_exact(*v));
    return *v;
}

double Config::number(const std::string& block, const std::string& key, double fallback) const {
    if (!has(block, key)) {
        record(block, key, format_exact(fallback));
        return fallback;
    }
    return number(block, key);
}

int Config::integer(const std::string& block, const std::string& key) const {
    const double v = number(block, key);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(block, key, "not an integer");
    record(block, key, std::to_string(static_cast<int>(v)));
    return static_cast<int>(v);
}

int Config::integer(const std::string& block, const std::string& key, int fallback) const {
    if (!has(block, key)) {
        record(block, key, std::to_string(fallback));
        return fallback;
    }
    return integer(block, key);
}

std::uint64_t Config::unsigned_integer(const std::string& block, const std::string& key, std::uint64_t fallback) const {
    if (!has(block, key)) {
        record(block, key, std::to_string(fallback));
        return fallback;
    }
    const std::string t = *raw(block, key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) fail(block, key, "not a nonnegative integer: '" + t + "'");
    record(block, key, std::to_string(v));
    return v;
}

std::string Config::text(const std::string& block, const std::string& key) const {
    require_block(block);
    const auto* r = raw(block, key);
    if (!r) fail(block, key, "missing key");
    record(block, key, *r);
    return *r;
}

std::string Config::text(const std::string& block, const std::string& key, const std::string& fallback) const {
    if (!has(block, key)) {
        record(block, key, fallback);
        return fallback;
    }
    return text(block, key);
}

bool Config::flag(const std::string& block, const std::string& key, bool fallback) const {
    if (!has(block, key)) {
        record(block, key, fallback ? "true" : "false");
        return fallback;
    }
    const std::string v = *raw(block, key);
    if (v != "true" && v != "false") fail(block, key, "expected true or false");
    record(block, key, v);
    return v == "true";
}

std::vector<double> Config::numbers(const std::string& block, const std::string& key) const {
    require_block(block);
    const auto* r = raw(block, key);
    if (!r) fail(block, key, "missing key");
    std::vector<double> out;
    for (const auto& item : split(strip_brackets(*r), ',')) {
        const auto v = to_double(item);
        if (!v) fail(block, key, "not a number list: '" + *r + "'");
        out.push_back(*v);
    }
    record(block, key, join(out));
    return out;
}

std::vector<double> Config::numbers(const std::string& block, const std::string& key,
                                    const std::vector<double>& fallback) const {
    if (!has(block, key)) {
        record(block, key, join(fallback));
        return fallback;
    }
    return numbers(block, key);
}

std::vector<std::vector<double>> Config::groups(const std::string& block, const std::string& key,
                                                const std::vector<std::vector<double>>& fallback) const {
    std::vector<std::vector<double>> out;
    if (!has(block, key)) {
        out = fallback;
    } else {
        const auto r = *raw(block, key);
        for (const auto& g : split(strip_brackets(r), ';')) {
            std::vector<double> row;
            for (const auto& item : split(strip_brackets(g), ',')) {
                const auto v = to_double(item);
                if (!v) fail(block, key, "not a list of number groups: '" + r + "'");
                row.push_back(*v);
            }
            out.push_back(row);
        }
    }
    std::string text;
    for (std::size_t i = 0; i < out.size(); ++i) text += (i ? "; " : "") + join(out[i]);
    record(block, key, text);
    return out;
}

std::optional<std::array<double, 4>> Config::box(const std::string& block, const std::string& key, int dim) const {
    if (!has(block, key)) return std::nullopt;
    const auto v = numbers(block, key);
    if (static_cast<int>(v.size()) != 2 * dim) fail(block, key, "expected " + std::to_string(2 * dim) + " numbers");
    std::array<double, 4> b{v[0], v[1], 0.0, 0.0};
    if (dim == 2) {
        b[2] = v[2];
        b[3] = v[3];
    }
    return b;
}

void Config::check_consumed() const {
    for (const auto& [name, block] : blocks_)
        for (const auto& [key, value] : block) {
            const auto u = used_.find(name);
            if (u == used_.end() || !u->second.count(key))
                throw ConfigError(origin_ + ": unknown key '" + name + "." + key + "'");
        }
}

std::string Config::resolved() const {
    std::string out;
    for (const auto& [name, block] : used_) {
        out += name + " {\n";
        for (const auto& [key, value] : block) out += "  " + key + " = " + value + "\n";
        out += "}\n";
    }
    return out;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_sci(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10e", x == 0.0 ? 0.0 : x);
    return buf;
}

std::string format_exact(double x) {
    char buf[40];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

}  // namespace cmfg
