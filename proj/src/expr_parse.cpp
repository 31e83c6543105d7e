#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>

#include "stochsym/errors.hpp"
#include "stochsym/expr.hpp"

namespace stochsym {

namespace {

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    Expr parse_all()
    {
        Expr e = expression();
        skip();
        if (pos_ != src_.size())
            throw ParseError("unexpected '" + std::string(1, src_[pos_]) + "'", pos_);
        return e;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;

    void skip()
    {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
    }

    bool accept(char c)
    {
        skip();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c))
            throw ParseError(std::string("expected '") + c + "'", pos_);
    }

    Expr expression()
    {
        std::vector<Expr> terms{term()};
        for (;;) {
            if (accept('+'))
                terms.push_back(term());
            else if (accept('-'))
                terms.push_back(-term());
            else
                break;
        }
        return Expr::nary(NodeKind::Add, std::move(terms));
    }

    Expr term()
    {
        Expr acc = unary();
        for (;;) {
            if (accept('*'))
                acc = acc * unary();
            else if (accept('/'))
                acc = acc / unary();
            else
                return acc;
        }
    }

    Expr unary()
    {
        if (accept('-'))
            return -unary();
        if (accept('+'))
            return unary();
        return power();
    }

    int integer_exponent()
    {
        skip();
        bool paren = accept('(');
        skip();
        const std::size_t start = pos_;
        int sign = 1;
        if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) {
            if (src_[pos_] == '-')
                sign = -1;
            ++pos_;
            skip();
        }
        const std::size_t digits = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
        if (pos_ == digits)
            throw ParseError("exponent must be an integer", start);
        if (pos_ < src_.size() && (src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E'))
            throw ParseError("exponent must be an integer", start);
        int value = 0;
        auto [ptr, ec] = std::from_chars(src_.data() + digits, src_.data() + pos_, value);
        if (ec != std::errc{})
            throw ParseError("exponent out of range", start);
        (void)ptr;
        if (paren)
            expect(')');
        else if (sign < 0)
            throw ParseError("negative exponent needs parentheses", start);
        return sign * value;
    }

    Expr power()
    {
        Expr base = primary();
        if (accept('^'))
            return Expr::power(std::move(base), integer_exponent());
        return base;
    }

    Expr number()
    {
        const std::size_t start = pos_;
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), value);
        if (ec != std::errc{} || !std::isfinite(value))
            throw ParseError("malformed number", start);
        pos_ = static_cast<std::size_t>(ptr - src_.data());
        return Expr(value);
    }

    std::string identifier()
    {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        return std::string(src_.substr(start, pos_ - start));
    }

    static std::optional<PhaseVar> phase_name(const std::string& id)
    {
        if (id.empty() || (id[0] != 'p' && id[0] != 'P' && id[0] != 'q'))
            return std::nullopt;
        PhaseVar v{id[0] == 'q' ? PhaseVar::Kind::Q : PhaseVar::Kind::P, 1};
        if (id.size() == 1)
            return v;
        if (id[1] == '0')
            return std::nullopt;
        int index = 0;
        auto [ptr, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), index);
        if (ec != std::errc{} || ptr != id.data() + id.size())
            return std::nullopt;
        v.index = index;
        return v;
    }

    Expr derivative_operator()
    {
        expect('[');
        std::vector<std::pair<PhaseVar, int>> vars;
        do {
            skip();
            const std::size_t at = pos_;
            auto v = phase_name(identifier());
            if (!v)
                throw ParseError("expected a phase variable in D[...]", at);
            vars.emplace_back(*v, 1);
        } while (accept(','));
        expect(']');
        expect('(');
        Expr inner = expression();
        expect(')');
        if (inner.kind() == NodeKind::Abstract) {
            std::vector<std::pair<PhaseVar, int>> all(inner.derivatives().begin(), inner.derivatives().end());
            all.insert(all.end(), vars.begin(), vars.end());
            return Expr::abstract(inner.name(), std::move(all));
        }
        for (const auto& [v, order] : vars)
            inner = diff(inner, v);
        return inner;
    }

    Expr primary()
    {
        skip();
        if (pos_ >= src_.size())
            throw ParseError("unexpected end of expression", pos_);
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return number();
        if (c == '(') {
            ++pos_;
            Expr e = expression();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            const std::string id = identifier();
            if (id == "D") {
                skip();
                if (pos_ < src_.size() && src_[pos_] == '[')
                    return derivative_operator();
            }
            skip();
            if (pos_ < src_.size() && src_[pos_] == '(') {
                ++pos_;
                if (accept(')'))
                    return Expr::abstract(id);
                Expr arg = expression();
                expect(')');
                if (id == "sin")
                    return sin(arg);
                if (id == "cos")
                    return cos(arg);
                if (id == "exp")
                    return exp(arg);
                throw ParseError("unknown function '" + id + "'", start);
            }
            if (auto v = phase_name(id))
                return Expr::var(*v);
            return Expr::param(id);
        }
        throw ParseError("unexpected '" + std::string(1, c) + "'", pos_);
    }
};

} // namespace

Expr parse(std::string_view source) { return Parser(source).parse_all(); }

} // namespace stochsym
