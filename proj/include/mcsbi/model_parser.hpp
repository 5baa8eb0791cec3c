#pragma once

#include <cctype>
#include <cstdlib>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mcsbi/errors.hpp"
#include "mcsbi/model.hpp"

namespace mcsbi {

namespace detail {

/// Token scanner shared by the propensity-expression parser.
class ExprLexer {
public:
    ExprLexer(std::string_view text, int line) : text_(text), line_(line) {}

    struct Token {
        enum Kind { Number, Ident, Plus, Minus, Star, Caret, LParen, RParen, End } kind;
        double number = 0.0;
        std::string ident;
        int column = 0;
    };

    Token next() {
        skip_space();
        Token t;
        t.column = static_cast<int>(pos_) + 1;
        if (pos_ >= text_.size()) {
            t.kind = Token::End;
            return t;
        }
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = text_.data() + pos_;
            char* end = nullptr;
            t.number = std::strtod(begin, &end);
            if (end == begin) throw ParseError("malformed number", line_, t.column);
            pos_ += static_cast<std::size_t>(end - begin);
            t.kind = Token::Number;
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            t.kind = Token::Ident;
            t.ident = std::string(text_.substr(start, pos_ - start));
            return t;
        }
        ++pos_;
        switch (c) {
            case '+': t.kind = Token::Plus; return t;
            case '-': t.kind = Token::Minus; return t;
            case '*': t.kind = Token::Star; return t;
            case '^': t.kind = Token::Caret; return t;
            case '(': t.kind = Token::LParen; return t;
            case ')': t.kind = Token::RParen; return t;
            default: throw ParseError(std::string("unexpected character '") + c + "'", line_, t.column);
        }
    }

private:
    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_;
};

/// Recursive-descent parser for polynomial expressions over species and
/// parameters: +, -, *, ^ (non-negative integer powers), parentheses.
/// Parameters are substituted numerically at parse time.
class ExprParser {
public:
    ExprParser(std::string_view text, int line, const ReactionNetwork& net)
        : lexer_(text, line), line_(line), net_(net) {
        advance();
    }

    Polynomial parse() {
        Polynomial p = parse_expr();
        if (tok_.kind != ExprLexer::Token::End)
            throw ParseError("trailing input in expression", line_, tok_.column);
        return p;
    }

private:
    using Token = ExprLexer::Token;

    void advance() { tok_ = lexer_.next(); }

    Polynomial parse_expr() {
        Polynomial p = parse_term();
        while (tok_.kind == Token::Plus || tok_.kind == Token::Minus) {
            bool minus = tok_.kind == Token::Minus;
            advance();
            Polynomial rhs = parse_term();
            if (minus)
                p -= rhs;
            else
                p += rhs;
        }
        return p;
    }

    Polynomial parse_term() {
        Polynomial p = parse_factor();
        while (tok_.kind == Token::Star) {
            advance();
            p = p * parse_factor();
        }
        return p;
    }

    Polynomial parse_factor() {
        if (tok_.kind == Token::Minus) {
            advance();
            return parse_factor() * -1.0;
        }
        Polynomial base = parse_primary();
        if (tok_.kind == Token::Caret) {
            advance();
            if (tok_.kind != Token::Number || tok_.number != std::floor(tok_.number) || tok_.number < 0)
                throw ParseError("exponent must be a non-negative integer", line_, tok_.column);
            int power = static_cast<int>(tok_.number);
            advance();
            return base.pow(power);
        }
        return base;
    }

    Polynomial parse_primary() {
        if (tok_.kind == Token::Number) {
            Polynomial p(tok_.number);
            advance();
            return p;
        }
        if (tok_.kind == Token::Ident) {
            std::string name = tok_.ident;
            int column = tok_.column;
            advance();
            int idx = net_.species_index(name);
            if (idx >= 0) return Polynomial::variable(idx);
            auto it = net_.parameters.find(name);
            if (it != net_.parameters.end()) return Polynomial(it->second);
            throw ParseError("unknown species or parameter '" + name + "'", line_, column);
        }
        if (tok_.kind == Token::LParen) {
            advance();
            Polynomial p = parse_expr();
            if (tok_.kind != Token::RParen)
                throw ParseError("expected ')'", line_, tok_.column);
            advance();
            return p;
        }
        throw ParseError("expected number, name or '('", line_, tok_.column);
    }

    ExprLexer lexer_;
    Token tok_;
    int line_;
    const ReactionNetwork& net_;
};

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

/// Parse one side of a reaction: '+'-separated `coeff*Species` terms (bare
/// species names count once) or `0` for the empty side.
inline std::vector<std::int64_t> parse_reaction_side(const std::string& side,
                                                     const ReactionNetwork& net, int line) {
    std::vector<std::int64_t> stoich(net.species_count(), 0);
    std::string s = trim(side);
    if (s == "0") return stoich;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t plus = s.find('+', pos);
        std::string term = trim(std::string_view(s).substr(pos, plus == std::string::npos
                                                                    ? std::string::npos
                                                                    : plus - pos));
        if (term.empty()) throw ParseError("empty stoichiometry term", line);
        std::int64_t coeff = 1;
        std::string name = term;
        std::size_t star = term.find('*');
        if (star != std::string::npos) {
            std::string cs = trim(std::string_view(term).substr(0, star));
            name = trim(std::string_view(term).substr(star + 1));
            char* end = nullptr;
            coeff = std::strtoll(cs.c_str(), &end, 10);
            if (end != cs.c_str() + cs.size() || coeff < 0)
                throw ParseError("stoichiometric coefficient must be a non-negative integer", line);
        }
        int idx = net.species_index(name);
        if (idx < 0) throw ParseError("unknown species '" + name + "' in reaction", line);
        stoich[static_cast<std::size_t>(idx)] += coeff;
        if (plus == std::string::npos) break;
        pos = plus + 1;
    }
    return stoich;
}

} // namespace detail

/// Parse the line-oriented model format:
///
///   # comment
///   param k = 0.1
///   species X_S = 40
///   reaction infect: X_S + X_I -> 2*X_I @ k * X_S * X_I
///
/// Names must be declared before use. `overrides` replaces parameter values
/// before they are substituted into propensities.
inline ReactionNetwork parse_model(const std::string& text,
                                   const std::map<std::string, double>& overrides = {}) {
    ReactionNetwork net;
    std::map<std::string, double> pending_overrides = overrides;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        std::size_t sp = line.find_first_of(" \t");
        std::string keyword = line.substr(0, sp);
        std::string rest = sp == std::string::npos ? "" : detail::trim(std::string_view(line).substr(sp));

        if (keyword == "param" || keyword == "species") {
            if (!net.reactions.empty())
                throw ParseError("declare species and parameters before the first reaction", line_no);
            std::size_t eq = rest.find('=');
            if (eq == std::string::npos)
                throw ParseError("expected '" + keyword + " <name> = <value>'", line_no);
            std::string name = detail::trim(std::string_view(rest).substr(0, eq));
            std::string value = detail::trim(std::string_view(rest).substr(eq + 1));
            if (!detail::valid_name(name))
                throw ParseError("invalid name '" + name + "'", line_no);
            if (net.species_index(name) >= 0 || net.parameters.count(name))
                throw ParseError("duplicate declaration of '" + name + "'", line_no);
            if (keyword == "param") {
                char* end = nullptr;
                double v = std::strtod(value.c_str(), &end);
                if (end != value.c_str() + value.size())
                    throw ParseError("malformed parameter value '" + value + "'", line_no);
                auto ov = pending_overrides.find(name);
                if (ov != pending_overrides.end()) {
                    v = ov->second;
                    pending_overrides.erase(ov);
                }
                net.parameters[name] = v;
            } else {
                char* end = nullptr;
                long long v = std::strtoll(value.c_str(), &end, 10);
                if (end != value.c_str() + value.size())
                    throw ParseError("malformed initial count '" + value + "'", line_no);
                if (v < 0) throw ParseError("negative initial count for species '" + name + "'", line_no);
                net.species.push_back({name, v});
            }
        } else if (keyword == "reaction") {
            std::size_t colon = rest.find(':');
            if (colon == std::string::npos) throw ParseError("expected 'reaction <name>: ...'", line_no);
            std::string name = detail::trim(std::string_view(rest).substr(0, colon));
            if (!detail::valid_name(name)) throw ParseError("invalid reaction name '" + name + "'", line_no);
            std::string body = detail::trim(std::string_view(rest).substr(colon + 1));
            std::size_t at = body.find('@');
            if (at == std::string::npos) throw ParseError("expected '@ <propensity>'", line_no);
            std::string sides = body.substr(0, at);
            std::string expr = body.substr(at + 1);
            std::size_t arrow = sides.find("->");
            if (arrow == std::string::npos) throw ParseError("expected '->' between reactants and products", line_no);

            Reaction r;
            r.name = name;
            r.reactants = detail::parse_reaction_side(sides.substr(0, arrow), net, line_no);
            r.products = detail::parse_reaction_side(sides.substr(arrow + 2), net, line_no);
            r.change_vector.resize(net.species_count());
            for (std::size_t s = 0; s < net.species_count(); ++s)
                r.change_vector[s] = r.products[s] - r.reactants[s];
            r.propensity = detail::ExprParser(expr, line_no, net).parse();
            net.reactions.push_back(std::move(r));
        } else {
            throw ParseError("unknown directive '" + keyword + "'", line_no);
        }
    }
    for (const auto& [name, v] : pending_overrides)
        throw ParseError("override for unknown parameter '" + name + "'");
    net.validate();
    return net;
}

} // namespace mcsbi
