#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sdfap/ast.hpp"
#include "sdfap/lexer.hpp"

namespace sdfap {

// Recursive-descent parser for the pattern-annotated functional DSL.
//
// Layout rule: top-level definitions start at column 1; where-bindings are
// indented. Bindings are separated by newlines or semicolons. There is no
// nested where.
class Parser {
public:
    explicit Parser(const std::string& source) : toks_(lex(source)) {}

    Program parse_program() {
        Program prog;
        skip_newlines();
        while (!at(TokKind::Eof)) {
            prog.defs.push_back(parse_definition());
            skip_newlines();
        }
        if (prog.defs.empty())
            throw CompileError(cur().pos, "no definitions in source");
        return prog;
    }

private:
    const Token& cur() const { return toks_[idx_]; }
    const Token& peek(std::size_t n = 1) const {
        return toks_[std::min(idx_ + n, toks_.size() - 1)];
    }
    bool at(TokKind k) const { return cur().kind == k; }

    Token eat(TokKind k, const char* what = nullptr) {
        if (!at(k)) {
            std::string msg = std::string("expected ") + to_string(k);
            if (what) msg += std::string(" (") + what + ")";
            msg += ", found " + std::string(to_string(cur().kind));
            if (!cur().text.empty() && cur().kind != TokKind::Newline) msg += " '" + cur().text + "'";
            throw CompileError(cur().pos, msg);
        }
        return toks_[idx_++];
    }

    void skip_newlines() {
        while (at(TokKind::Newline) || at(TokKind::Semicolon)) ++idx_;
    }

    // A flat pattern literal "[3]" or "[2,2]". Entries must be nonnegative.
    std::vector<std::int64_t> parse_flat_pattern() {
        eat(TokKind::LBracket);
        std::vector<std::int64_t> entries;
        entries.push_back(eat(TokKind::Int, "pattern entry").value);
        while (at(TokKind::Comma)) {
            ++idx_;
            entries.push_back(eat(TokKind::Int, "pattern entry").value);
        }
        eat(TokKind::RBracket);
        return entries;
    }

    // True when the upcoming tokens form "[int,int,...]": a pattern literal
    // rather than a vector expression.
    bool looks_like_pattern() const {
        if (!at(TokKind::LBracket)) return false;
        std::size_t j = idx_ + 1;
        if (toks_[j].kind != TokKind::Int) return false;
        while (toks_[j].kind == TokKind::Int) {
            ++j;
            if (toks_[j].kind == TokKind::RBracket) return true;
            if (toks_[j].kind != TokKind::Comma) return false;
            ++j;
        }
        return false;
    }

    Param parse_param() {
        Param p;
        p.pos = cur().pos;
        if (at(TokKind::Ident)) {
            p.name = eat(TokKind::Ident).text;
            return p;
        }
        eat(TokKind::LParen, "annotated parameter");
        p.annotation = parse_flat_pattern();
        eat(TokKind::Comma);
        p.name = eat(TokKind::Ident, "parameter name").text;
        eat(TokKind::RParen);
        return p;
    }

    Definition parse_definition() {
        Definition d;
        d.pos = cur().pos;
        if (d.pos.col != 1)
            throw CompileError(d.pos, "top-level definition must start at column 1");
        d.name = eat(TokKind::Ident, "definition name").text;
        while (at(TokKind::Ident) || at(TokKind::LParen))
            d.params.push_back(parse_param());
        eat(TokKind::Equals);
        parse_rhs(d);
        skip_newlines();
        if (at(TokKind::KwWhere)) {
            ++idx_;
            skip_newlines();
            while (at(TokKind::Ident) && cur().pos.col > 1) {
                d.bindings.push_back(parse_binding());
                skip_newlines();
            }
            if (d.bindings.empty())
                throw CompileError(cur().pos, "empty where block");
        }
        return d;
    }

    // The right-hand side is either a plain expression or an annotated
    // output "([2], o)". The annotated form is recognized by the '([' prefix
    // followed by an integer list and a comma.
    void parse_rhs(Definition& d) {
        if (at(TokKind::LParen)) {
            std::size_t save = idx_;
            ++idx_;
            if (looks_like_pattern()) {
                auto pat = parse_flat_pattern();
                if (at(TokKind::Comma)) {
                    ++idx_;
                    d.output_annotation = std::move(pat);
                    d.body = parse_expr();
                    eat(TokKind::RParen);
                    return;
                }
            }
            idx_ = save;
        }
        d.body = parse_expr();
    }

    Binding parse_binding() {
        Binding b;
        b.pos = cur().pos;
        b.name = eat(TokKind::Ident, "binding name").text;
        while (at(TokKind::Ident) || at(TokKind::LParen)) {
            // Disambiguate "f x = ..." parameters from "o = ..." where the
            // next binding follows: parameters only appear before '='.
            if (at(TokKind::LParen)) {
                b.params.push_back(parse_param());
            } else {
                b.params.push_back(Param{eat(TokKind::Ident).text, std::nullopt, cur().pos});
            }
        }
        eat(TokKind::Equals);
        b.body = parse_expr();
        return b;
    }

    ExprPtr parse_expr() { return parse_additive(); }

    ExprPtr parse_additive() {
        ExprPtr lhs = parse_multiplicative();
        while (at(TokKind::Plus) || at(TokKind::Minus)) {
            SourcePos pos = cur().pos;
            BinOpKind op = at(TokKind::Plus) ? BinOpKind::Add : BinOpKind::Sub;
            ++idx_;
            lhs = Expr::binop(op, lhs, parse_multiplicative(), pos);
        }
        return lhs;
    }

    ExprPtr parse_multiplicative() {
        ExprPtr lhs = parse_unary();
        while (at(TokKind::Star)) {
            SourcePos pos = cur().pos;
            ++idx_;
            lhs = Expr::binop(BinOpKind::Mul, lhs, parse_unary(), pos);
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        if (at(TokKind::Minus)) {
            SourcePos pos = cur().pos;
            ++idx_;
            ExprPtr operand = parse_unary();
            if (operand->kind == ExprKind::IntLit)
                return Expr::lit(-operand->value, pos);
            return Expr::binop(BinOpKind::Sub, Expr::lit(0, pos), operand, pos);
        }
        return parse_application();
    }

    bool starts_atom() const {
        switch (cur().kind) {
            case TokKind::Ident:
            case TokKind::Int:
            case TokKind::LParen:
            case TokKind::LBracket:
            case TokKind::Backslash:
                return true;
            default:
                return false;
        }
    }

    ExprPtr parse_application() {
        SourcePos pos = cur().pos;

        // Higher-order functions and the builtins div/transpose are
        // recognized by name at the head of an application.
        if (at(TokKind::Ident)) {
            const std::string& n = cur().text;
            if (n == "map" || n == "imap" || n == "foldl" || n == "fold")
                return parse_hof();
            if (n == "transpose") {
                ++idx_;
                if (!starts_atom()) return Expr::var("transpose", pos);
                return Expr::transpose(parse_atom(), pos);
            }
            if (n == "div") {
                ++idx_;
                if (!starts_atom()) return Expr::var("div", pos);
                ExprPtr a = parse_atom();
                if (!starts_atom())
                    throw CompileError(pos, "div takes two arguments");
                ExprPtr b = parse_atom();
                return Expr::binop(BinOpKind::Div, a, b, pos);
            }
        }

        ExprPtr head = parse_atom();
        std::vector<ExprPtr> args;
        while (starts_atom())
            args.push_back(parse_atom());
        if (args.empty()) return head;
        return Expr::apply(head, std::move(args), pos);
    }

    ExprPtr parse_hof() {
        SourcePos pos = cur().pos;
        const std::string name = eat(TokKind::Ident).text;
        HofKind kind = name == "map"    ? HofKind::Map
                     : name == "imap"   ? HofKind::Imap
                     : name == "foldl"  ? HofKind::Foldl
                                        : HofKind::Fold;
        std::optional<std::vector<std::int64_t>> pat;
        if (looks_like_pattern())
            pat = parse_flat_pattern();
        if (!starts_atom())
            throw CompileError(pos, name + " needs a function argument");
        ExprPtr fn = parse_atom();
        std::vector<ExprPtr> args;
        while (starts_atom())
            args.push_back(parse_atom());
        return Expr::hofapply(kind, std::move(pat), std::move(fn), std::move(args), pos);
    }

    ExprPtr parse_atom() {
        SourcePos pos = cur().pos;
        switch (cur().kind) {
            case TokKind::Int: {
                auto v = eat(TokKind::Int).value;
                return Expr::lit(v, pos);
            }
            case TokKind::Ident: {
                auto n = eat(TokKind::Ident).text;
                return Expr::var(n, pos);
            }
            case TokKind::Backslash:
                return parse_lambda();
            case TokKind::LBracket: {
                ++idx_;
                std::vector<ExprPtr> elems;
                if (!at(TokKind::RBracket)) {
                    elems.push_back(parse_expr());
                    while (at(TokKind::Comma)) {
                        ++idx_;
                        elems.push_back(parse_expr());
                    }
                }
                eat(TokKind::RBracket);
                return Expr::veclit(std::move(elems), pos);
            }
            case TokKind::LParen: {
                ++idx_;
                // Operator section: (+), (-), (*)
                if ((at(TokKind::Plus) || at(TokKind::Minus) || at(TokKind::Star)) &&
                    peek().kind == TokKind::RParen) {
                    BinOpKind op = at(TokKind::Plus)  ? BinOpKind::Add
                                 : at(TokKind::Minus) ? BinOpKind::Sub
                                                      : BinOpKind::Mul;
                    ++idx_;
                    eat(TokKind::RParen);
                    return Expr::lambda({"secA", "secB"},
                                        Expr::binop(op, Expr::var("secA", pos), Expr::var("secB", pos), pos),
                                        pos);
                }
                ExprPtr e = parse_expr();
                if (at(TokKind::Comma)) {
                    std::vector<ExprPtr> elems{e};
                    while (at(TokKind::Comma)) {
                        ++idx_;
                        elems.push_back(parse_expr());
                    }
                    eat(TokKind::RParen);
                    return Expr::tuple(std::move(elems), pos);
                }
                eat(TokKind::RParen);
                return e;
            }
            default:
                throw CompileError(pos, std::string("unexpected ") + to_string(cur().kind) +
                                            (cur().text.empty() ? "" : " '" + cur().text + "'"));
        }
    }

    ExprPtr parse_lambda() {
        SourcePos pos = eat(TokKind::Backslash).pos;
        std::vector<std::string> params;
        while (at(TokKind::Ident))
            params.push_back(eat(TokKind::Ident).text);
        if (params.empty())
            throw CompileError(pos, "lambda needs at least one parameter");
        eat(TokKind::Arrow);
        ExprPtr body = parse_expr();
        return Expr::lambda(std::move(params), std::move(body), pos);
    }

    std::vector<Token> toks_;
    std::size_t idx_ = 0;
};

inline Program parse_program_text(const std::string& source) {
    return Parser(source).parse_program();
}

} // namespace sdfap
