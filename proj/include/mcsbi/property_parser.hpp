#pragma once

#include <cctype>
#include <cstdlib>
#include <string>
#include <string_view>

#include "mcsbi/errors.hpp"
#include "mcsbi/property.hpp"

namespace mcsbi {

namespace detail {

class PropLexer {
public:
    explicit PropLexer(std::string_view text) : text_(text) {}

    struct Token {
        enum Kind {
            Number, Ident, Cmp, And, Or, Not, Plus, Minus, Star,
            LParen, RParen, LBracket, RBracket, Comma, PEq, End
        } kind;
        double number = 0.0;
        std::string ident;       // for Ident
        Comparator cmp = Comparator::Less; // for Cmp
        int column = 0;
    };

    Token peek() {
        if (!has_peek_) {
            peeked_ = scan();
            has_peek_ = true;
        }
        return peeked_;
    }

    Token next() {
        Token t = peek();
        has_peek_ = false;
        return t;
    }

private:
    Token scan() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        Token t;
        t.column = static_cast<int>(pos_) + 1;
        if (pos_ >= text_.size()) {
            t.kind = Token::End;
            return t;
        }
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
            const char* begin = text_.data() + pos_;
            char* end = nullptr;
            t.number = std::strtod(begin, &end);
            pos_ += static_cast<std::size_t>(end - begin);
            t.kind = Token::Number;
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            std::string word(text_.substr(start, pos_ - start));
            if (word == "P" && pos_ + 1 < text_.size() && text_[pos_] == '=' && text_[pos_ + 1] == '?') {
                pos_ += 2;
                t.kind = Token::PEq;
                return t;
            }
            t.kind = Token::Ident;
            t.ident = std::move(word);
            return t;
        }
        ++pos_;
        switch (c) {
            case '&': t.kind = Token::And; return t;
            case '|': t.kind = Token::Or; return t;
            case '!': t.kind = Token::Not; return t;
            case '+': t.kind = Token::Plus; return t;
            case '-': t.kind = Token::Minus; return t;
            case '*': t.kind = Token::Star; return t;
            case '(': t.kind = Token::LParen; return t;
            case ')': t.kind = Token::RParen; return t;
            case '[': t.kind = Token::LBracket; return t;
            case ']': t.kind = Token::RBracket; return t;
            case ',': t.kind = Token::Comma; return t;
            case '<':
            case '>': {
                t.kind = Token::Cmp;
                bool eq = pos_ < text_.size() && text_[pos_] == '=';
                if (eq) ++pos_;
                t.cmp = c == '<' ? (eq ? Comparator::LessEq : Comparator::Less)
                                 : (eq ? Comparator::GreaterEq : Comparator::Greater);
                return t;
            }
            case '=': {
                if (pos_ < text_.size() && text_[pos_] == '=') ++pos_;
                t.kind = Token::Cmp;
                t.cmp = Comparator::Equal;
                return t;
            }
            default:
                throw ParseError(std::string("unexpected character '") + c + "' in property", 0, t.column);
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    bool has_peek_ = false;
    Token peeked_;
};

/// Parser for `P=? [ <path> ]` with the time-bounded until fragment.
class PropertyParser {
public:
    PropertyParser(std::string_view text, const ReactionNetwork& net) : lexer_(text), net_(net) {}

    PathFormula parse() {
        expect(Token::PEq, "expected 'P=?'");
        expect(Token::LBracket, "expected '[' after P=?");
        PathFormula f = parse_path();
        expect(Token::RBracket, "expected closing ']'");
        expect(Token::End, "trailing input after property");
        f.check();
        return f;
    }

private:
    using Token = PropLexer::Token;

    void expect(Token::Kind kind, const char* msg) {
        Token t = lexer_.next();
        if (t.kind != kind) throw ParseError(msg, 0, t.column);
    }

    PathFormula parse_path() {
        Token t = lexer_.peek();
        if (t.kind == Token::Ident && (t.ident == "F" || t.ident == "G")) {
            lexer_.next();
            PathFormula f;
            f.kind = t.ident == "F" ? PathKind::Eventually : PathKind::Globally;
            f.horizon = parse_bounds();
            f.left = StateFormula::tt();
            f.right = parse_state_formula();
            return f;
        }
        PathFormula f;
        f.kind = PathKind::Until;
        f.left = parse_state_formula();
        Token u = lexer_.next();
        if (u.kind != Token::Ident || u.ident != "U")
            throw ParseError("expected 'U' operator", 0, u.column);
        f.horizon = parse_bounds();
        f.right = parse_state_formula();
        return f;
    }

    /// `[t1,t2]`; only t1 = 0 is supported.
    double parse_bounds() {
        expect(Token::LBracket, "expected '[' after temporal operator");
        Token lo = lexer_.next();
        if (lo.kind != Token::Number) throw ParseError("expected lower time bound", 0, lo.column);
        expect(Token::Comma, "expected ',' in time bounds");
        Token hi = lexer_.next();
        if (hi.kind != Token::Number) throw ParseError("expected upper time bound", 0, hi.column);
        expect(Token::RBracket, "expected ']' after time bounds");
        if (lo.number != 0.0)
            throw ParseError("nonzero lower time bound " + std::to_string(lo.number) +
                             " is not supported; only [0,t] intervals are accepted", 0, lo.column);
        if (!(hi.number > 0.0)) throw ParseError("upper time bound must be > 0", 0, hi.column);
        return hi.number;
    }

    StateFormula parse_state_formula() { return parse_or(); }

    StateFormula parse_or() {
        StateFormula f = parse_and();
        while (lexer_.peek().kind == Token::Or) {
            lexer_.next();
            f = StateFormula::disjunction(std::move(f), parse_and());
        }
        return f;
    }

    StateFormula parse_and() {
        StateFormula f = parse_unary();
        while (lexer_.peek().kind == Token::And) {
            lexer_.next();
            f = StateFormula::conjunction(std::move(f), parse_unary());
        }
        return f;
    }

    StateFormula parse_unary() {
        Token t = lexer_.peek();
        if (t.kind == Token::Not) {
            lexer_.next();
            return StateFormula::negation(parse_unary());
        }
        if (t.kind == Token::LParen) {
            lexer_.next();
            StateFormula f = parse_or();
            expect(Token::RParen, "expected ')'");
            return f;
        }
        if (t.kind == Token::Ident && t.ident == "tt") {
            lexer_.next();
            return StateFormula::tt();
        }
        return parse_atom();
    }

    /// linexpr cmp linexpr, normalized to (lhs - rhs) cmp (const rhs - const lhs).
    StateFormula parse_atom() {
        auto [lhs_coeffs, lhs_const] = parse_linexpr();
        Token cmp = lexer_.next();
        if (cmp.kind != Token::Cmp) throw ParseError("expected comparison operator", 0, cmp.column);
        auto [rhs_coeffs, rhs_const] = parse_linexpr();

        AtomicProp atom;
        atom.coefficients = lhs_coeffs - rhs_coeffs;
        atom.comparator = cmp.cmp;
        atom.bound = rhs_const - lhs_const;
        atom.check();
        return StateFormula::atom(std::move(atom));
    }

    /// +/- combination of optionally scaled species names and constants.
    std::pair<Eigen::VectorXd, double> parse_linexpr() {
        Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net_.species_count()));
        double constant = 0.0;
        double sign = 1.0;
        bool first = true;
        for (;;) {
            Token t = lexer_.peek();
            if (t.kind == Token::Plus || t.kind == Token::Minus) {
                lexer_.next();
                sign = t.kind == Token::Minus ? -sign : sign;
                continue;
            }
            if (t.kind == Token::Number) {
                lexer_.next();
                double value = t.number;
                if (lexer_.peek().kind == Token::Star) {
                    lexer_.next();
                    Token name = lexer_.next();
                    if (name.kind != Token::Ident)
                        throw ParseError("expected species name after '*'", 0, name.column);
                    coeffs[species_index(name)] += sign * value;
                } else {
                    constant += sign * value;
                }
            } else if (t.kind == Token::Ident && t.ident != "U") {
                lexer_.next();
                coeffs[species_index(t)] += sign;
            } else {
                if (first) throw ParseError("expected linear expression", 0, t.column);
                break;
            }
            first = false;
            sign = 1.0;
            Token sep = lexer_.peek();
            if (sep.kind == Token::Plus || sep.kind == Token::Minus) continue;
            break;
        }
        return {coeffs, constant};
    }

    Eigen::Index species_index(const Token& t) {
        int idx = net_.species_index(t.ident);
        if (idx < 0)
            throw ParseError("unknown species '" + t.ident + "' in property", 0, t.column);
        return static_cast<Eigen::Index>(idx);
    }

    PropLexer lexer_;
    const ReactionNetwork& net_;
};

} // namespace detail

/// Parse `P=? [ ... ]` against a network's species. Supported path operators:
/// `sf U[0,t] sf`, `F[0,t] sf`, `G[0,t] sf`.
inline PathFormula parse_property(const std::string& text, const ReactionNetwork& network) {
    return detail::PropertyParser(text, network).parse();
}

} // namespace mcsbi
