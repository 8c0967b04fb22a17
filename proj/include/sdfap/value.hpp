#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdfap/shapes.hpp"

namespace sdfap {

// Error raised by the golden evaluator (division by zero, shape mismatch).
class EvalError : public std::runtime_error {
public:
    EvalError(const std::string& msg, std::string path = "")
        : std::runtime_error(path.empty() ? msg : msg + " at " + path), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// A runtime value: a scalar integer or a nested vector with uniform shape.
class Value {
public:
    Value() : scalar_(0), is_scalar_(true) {}
    explicit Value(std::int64_t v) : scalar_(v), is_scalar_(true) {}
    explicit Value(std::vector<Value> elems)
        : scalar_(0), elems_(std::move(elems)), is_scalar_(false) {}

    bool is_scalar() const { return is_scalar_; }
    std::int64_t scalar() const {
        if (!is_scalar_) throw EvalError("expected a scalar value");
        return scalar_;
    }
    const std::vector<Value>& elems() const {
        if (is_scalar_) throw EvalError("expected a vector value");
        return elems_;
    }
    std::size_t size() const { return elems().size(); }
    const Value& operator[](std::size_t i) const { return elems()[i]; }

    Shape shape() const {
        if (is_scalar_) return Shape::scalar();
        if (elems_.empty()) throw EvalError("empty vector value has no shape");
        return Shape::vec(static_cast<std::int64_t>(elems_.size()), elems_[0].shape());
    }

    bool shape_uniform() const {
        if (is_scalar_) return true;
        if (elems_.empty()) return false;
        Shape s = elems_[0].is_scalar() ? Shape::scalar() : elems_[0].shape();
        for (const auto& e : elems_) {
            if (!e.shape_uniform()) return false;
            if ((e.is_scalar() ? Shape::scalar() : e.shape()) != s) return false;
        }
        return true;
    }

    void flatten_into(std::vector<std::int64_t>& out) const {
        if (is_scalar_) {
            out.push_back(scalar_);
            return;
        }
        for (const auto& e : elems_) e.flatten_into(out);
    }

    std::vector<std::int64_t> flatten() const {
        std::vector<std::int64_t> out;
        flatten_into(out);
        return out;
    }

    static Value from_flat(const Shape& shape, std::span<const std::int64_t> scalars) {
        std::size_t pos = 0;
        Value v = build(shape, scalars, pos);
        if (pos != scalars.size())
            throw EvalError("scalar count " + std::to_string(scalars.size()) +
                            " does not match shape " + shape.str());
        return v;
    }

    bool operator==(const Value& o) const {
        if (is_scalar_ != o.is_scalar_) return false;
        if (is_scalar_) return scalar_ == o.scalar_;
        return elems_ == o.elems_;
    }
    bool operator!=(const Value& o) const { return !(*this == o); }

    std::string str() const {
        if (is_scalar_) return std::to_string(scalar_);
        std::string s = "[";
        for (std::size_t i = 0; i < elems_.size(); ++i) {
            if (i) s += ",";
            s += elems_[i].str();
        }
        return s + "]";
    }

private:
    static Value build(const Shape& shape, std::span<const std::int64_t> scalars, std::size_t& pos) {
        if (shape.is_scalar()) {
            if (pos >= scalars.size()) throw EvalError("not enough scalars for shape");
            return Value(scalars[pos++]);
        }
        std::vector<Value> elems;
        elems.reserve(static_cast<std::size_t>(shape.outer()));
        Shape es = shape.element();
        for (std::int64_t i = 0; i < shape.outer(); ++i)
            elems.push_back(build(es, scalars, pos));
        return Value(std::move(elems));
    }

    std::int64_t scalar_;
    std::vector<Value> elems_;
    bool is_scalar_;
};

// Two's-complement wrap of v to `bits` bits (the DSL's scalar width).
inline std::int64_t wrap_width(std::int64_t v, int bits) {
    if (bits >= 64) return v;
    const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
    std::uint64_t u = static_cast<std::uint64_t>(v) & mask;
    if (u & (std::uint64_t{1} << (bits - 1))) u |= ~mask;
    return static_cast<std::int64_t>(u);
}

} // namespace sdfap
