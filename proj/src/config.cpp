#include "stochsym/config.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "stochsym/errors.hpp"

namespace stochsym {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& v, int line)
{
    if (v.size() >= 2 && v.front() == '"') {
        if (v.back() != '"')
            throw ConfigError("line " + std::to_string(line) + ": unterminated string");
        return v.substr(1, v.size() - 2);
    }
    return v;
}

// Strips a trailing comment that is not inside quotes.
std::string_view strip_comment(std::string_view s)
{
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"')
            quoted = !quoted;
        else if (s[i] == '#' && !quoted)
            return s.substr(0, i);
    }
    return s;
}

template <class T>
T number(const std::string& key, const std::string& v)
{
    T out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    return out;
}

using Section = std::map<std::string, std::pair<std::string, int>>;

} // namespace

SystemConfig parse_config(std::string_view text)
{
    std::map<std::string, Section> sections;
    std::string current;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            current = trim(std::string_view(line).substr(1, line.size() - 2));
            static const std::set<std::string> known{"system", "parameters", "hamiltonians", "initial", "defaults"};
            if (!known.contains(current))
                throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + current + "]");
            if (sections.contains(current))
                throw ConfigError("line " + std::to_string(line_no) + ": duplicate section [" + current + "]");
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        if (current.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": key outside of a section");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = unquote(trim(std::string_view(line).substr(eq + 1)), line_no);
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (!sections[current].emplace(key, std::make_pair(value, line_no)).second)
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }

    auto require = [&](const std::string& sec) -> Section& {
        auto it = sections.find(sec);
        if (it == sections.end())
            throw ConfigError("missing section [" + sec + "]");
        return it->second;
    };
    auto take = [](Section& s, const std::string& key) -> std::optional<std::string> {
        auto it = s.find(key);
        if (it == s.end())
            return std::nullopt;
        std::string v = it->second.first;
        s.erase(it);
        return v;
    };
    auto reject_rest = [](const Section& s, const std::string& sec) {
        if (!s.empty())
            throw ConfigError("line " + std::to_string(s.begin()->second.second) + ": unknown key '" +
                              s.begin()->first + "' in [" + sec + "]");
    };

    SystemConfig cfg;
    Section& sys = require("system");
    cfg.name = take(sys, "name").value_or("system");
    const auto d_text = take(sys, "d");
    const auto m_text = take(sys, "m");
    if (!d_text || !m_text)
        throw ConfigError("[system] needs d and m");
    const int d = number<int>("d", *d_text);
    const int m = number<int>("m", *m_text);
    if (d < 1 || m < 0)
        throw ConfigError("[system] needs d >= 1 and m >= 0");
    reject_rest(sys, "system");

    Binding params;
    if (auto it = sections.find("parameters"); it != sections.end()) {
        for (const auto& [key, val] : it->second) {
            if (key == "h")
                throw ConfigError("parameter name 'h' is reserved for the step size");
            params[key] = number<double>(key, val.first);
        }
    }

    Section& hams = require("hamiltonians");
    std::vector<Expr> hs;
    for (int j = 0; j <= m; ++j) {
        const std::string key = "H" + std::to_string(j);
        const auto src = take(hams, key);
        if (!src)
            throw ConfigError("[hamiltonians] is missing " + key);
        try {
            hs.push_back(parse(*src));
        } catch (const ParseError& e) {
            throw ParseError(key + ": " + e.what());
        }
    }
    reject_rest(hams, "hamiltonians");
    try {
        cfg.system = make_system(cfg.name, d, std::move(hs), std::move(params));
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }

    cfg.initial.p.assign(static_cast<std::size_t>(d), 0.0);
    cfg.initial.q.assign(static_cast<std::size_t>(d), 0.0);
    if (d == 1)
        cfg.initial.q[0] = 1.0;
    if (auto it = sections.find("initial"); it != sections.end()) {
        Section& init = it->second;
        for (int k = 1; k <= d; ++k) {
            const auto sk = static_cast<std::size_t>(k - 1);
            for (char c : {'p', 'q'}) {
                auto& target = c == 'p' ? cfg.initial.p[sk] : cfg.initial.q[sk];
                std::string name = std::string(1, c) + std::to_string(k);
                auto v = take(init, name);
                if (!v && k == 1)
                    v = take(init, std::string(1, c));
                if (v)
                    target = number<double>(name, *v);
            }
        }
        reject_rest(init, "initial");
    }

    if (auto it = sections.find("defaults"); it != sections.end()) {
        Section& def = it->second;
        if (auto v = take(def, "h"))
            cfg.h = number<double>("h", *v);
        if (auto v = take(def, "T"))
            cfg.T = number<double>("T", *v);
        if (auto v = take(def, "samples"))
            cfg.samples = number<std::int64_t>("samples", *v);
        if (auto v = take(def, "seed"))
            cfg.seed = number<std::uint64_t>("seed", *v);
        reject_rest(def, "defaults");
        if (!(cfg.h > 0.0) || !(cfg.T > 0.0) || cfg.samples < 1)
            throw ConfigError("[defaults] needs h > 0, T > 0 and samples >= 1");
    }
    return cfg;
}

SystemConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace stochsym
