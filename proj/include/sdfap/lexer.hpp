#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "sdfap/diagnostics.hpp"

namespace sdfap {

enum class TokKind {
    Ident,
    Int,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Equals,
    Plus,
    Minus,
    Star,
    Backslash,
    Arrow,
    Semicolon,
    KwWhere,
    Newline,
    Eof,
};

struct Token {
    TokKind kind;
    std::string text;
    std::int64_t value = 0;
    SourcePos pos;
};

inline const char* to_string(TokKind k) {
    switch (k) {
        case TokKind::Ident: return "identifier";
        case TokKind::Int: return "integer";
        case TokKind::LParen: return "'('";
        case TokKind::RParen: return "')'";
        case TokKind::LBracket: return "'['";
        case TokKind::RBracket: return "']'";
        case TokKind::Comma: return "','";
        case TokKind::Equals: return "'='";
        case TokKind::Plus: return "'+'";
        case TokKind::Minus: return "'-'";
        case TokKind::Star: return "'*'";
        case TokKind::Backslash: return "'\\'";
        case TokKind::Arrow: return "'->'";
        case TokKind::Semicolon: return "';'";
        case TokKind::KwWhere: return "'where'";
        case TokKind::Newline: return "newline";
        case TokKind::Eof: return "end of input";
    }
    return "?";
}

// Tokenizes a whole source file. Newlines are kept as tokens because they
// separate where-bindings; consecutive newlines collapse into one.
inline std::vector<Token> lex(const std::string& src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;

    auto push = [&](TokKind k, std::string text, SourcePos pos, std::int64_t v = 0) {
        out.push_back(Token{k, std::move(text), v, pos});
    };

    while (i < src.size()) {
        char c = src[i];
        SourcePos pos{line, col};
        if (c == '\n') {
            if (!out.empty() && out.back().kind != TokKind::Newline)
                push(TokKind::Newline, "\n", pos);
            ++i;
            ++line;
            col = 1;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            ++col;
            continue;
        }
        if (c == '-' && i + 1 < src.size() && src[i + 1] == '-') {
            while (i < src.size() && src[i] != '\n') { ++i; ++col; }
            continue;
        }
        if (c == '-' && i + 1 < src.size() && src[i + 1] == '>') {
            push(TokKind::Arrow, "->", pos);
            i += 2;
            col += 2;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = i;
            while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) { ++i; ++col; }
            std::string text = src.substr(start, i - start);
            push(TokKind::Int, text, pos, std::stoll(text));
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = i;
            while (i < src.size() &&
                   (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_' || src[i] == '\'')) {
                ++i;
                ++col;
            }
            std::string text = src.substr(start, i - start);
            push(text == "where" ? TokKind::KwWhere : TokKind::Ident, text, pos);
            continue;
        }
        TokKind k;
        switch (c) {
            case '(': k = TokKind::LParen; break;
            case ')': k = TokKind::RParen; break;
            case '[': k = TokKind::LBracket; break;
            case ']': k = TokKind::RBracket; break;
            case ',': k = TokKind::Comma; break;
            case '=': k = TokKind::Equals; break;
            case '+': k = TokKind::Plus; break;
            case '-': k = TokKind::Minus; break;
            case '*': k = TokKind::Star; break;
            case '\\': k = TokKind::Backslash; break;
            case ';': k = TokKind::Semicolon; break;
            default:
                throw CompileError(pos, std::string("unexpected character '") + c + "'");
        }
        push(k, std::string(1, c), pos);
        ++i;
        ++col;
    }
    out.push_back(Token{TokKind::Eof, "", 0, SourcePos{line, col}});
    return out;
}

} // namespace sdfap
