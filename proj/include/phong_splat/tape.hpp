#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "phong_splat/dual.hpp"

namespace phong_splat {

enum class OpKind : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Pow,
    Sqrt,
    Max,
    Clamp,
    Abs,
    Sigmoid,
    Sum,
    Product,
    Entropy,
    RayAlpha,
    Custom,
};

const char* op_name(OpKind kind);

class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(std::string node_kind, bool backward)
        : std::runtime_error("non-finite value in " + std::string(backward ? "backward" : "forward") +
                             " pass at node '" + node_kind + "'"),
          node_kind_(std::move(node_kind)),
          backward_(backward) {}

    const std::string& node_kind() const { return node_kind_; }
    bool in_backward() const { return backward_; }

private:
    std::string node_kind_;
    bool backward_;
};

// Values computed behind a stop-gradient. In Record mode they are captured in
// call order; in Replay mode the captured values are substituted back, so a
// finite-difference probe sees the stop-gradient branches as constants.
class FrozenValues {
public:
    enum class Mode { Record, Replay };

    void start_recording() {
        mode_ = Mode::Record;
        values_.clear();
        cursor_ = 0;
    }
    void start_replay() {
        mode_ = Mode::Replay;
        cursor_ = 0;
    }
    Mode mode() const { return mode_; }
    std::size_t size() const { return values_.size(); }

    void process(std::span<double> values) {
        if (mode_ == Mode::Record) {
            values_.insert(values_.end(), values.begin(), values.end());
            return;
        }
        if (cursor_ + values.size() > values_.size()) {
            throw std::logic_error("frozen value replay out of sync with recording");
        }
        for (double& v : values) v = values_[cursor_++];
    }

private:
    Mode mode_ = Mode::Record;
    std::vector<double> values_;
    std::size_t cursor_ = 0;
};

template <class T>
class Tape;

// Handle to a tape node, or an inline constant when `tape` is null.
template <class T>
class Var {
public:
    static constexpr std::uint32_t kConstant = std::numeric_limits<std::uint32_t>::max();

    Var() = default;
    Var(double value) : val_(value) {}  // NOLINT(google-explicit-constructor)
    Var(const T& value, Tape<T>* tape, std::uint32_t id) : val_(value), tape_(tape), id_(id) {}

    static Var constant(const T& value) {
        Var v;
        v.val_ = value;
        return v;
    }

    const T& value() const { return val_; }
    double primal_value() const { return primal(val_); }
    bool is_constant() const { return tape_ == nullptr; }
    std::uint32_t id() const { return id_; }
    Tape<T>* tape() const { return tape_; }

    friend Var operator+(const Var& a, const Var& b) {
        if (a.is_constant() && b.is_constant()) return constant(a.val_ + b.val_);
        return owner(a, b)->make(OpKind::Add, a.val_ + b.val_, {{&a, T(1.0)}, {&b, T(1.0)}});
    }
    friend Var operator-(const Var& a, const Var& b) {
        if (a.is_constant() && b.is_constant()) return constant(a.val_ - b.val_);
        return owner(a, b)->make(OpKind::Sub, a.val_ - b.val_, {{&a, T(1.0)}, {&b, T(-1.0)}});
    }
    friend Var operator*(const Var& a, const Var& b) {
        if (a.is_constant() && b.is_constant()) return constant(a.val_ * b.val_);
        return owner(a, b)->make(OpKind::Mul, a.val_ * b.val_, {{&a, b.val_}, {&b, a.val_}});
    }
    friend Var operator/(const Var& a, const Var& b) {
        if (a.is_constant() && b.is_constant()) return constant(a.val_ / b.val_);
        const T q = a.val_ / b.val_;
        const T inv = T(1.0) / b.val_;
        return owner(a, b)->make(OpKind::Div, q, {{&a, inv}, {&b, -q * inv}});
    }
    friend Var operator-(const Var& a) {
        if (a.is_constant()) return constant(-a.val_);
        return a.tape_->make(OpKind::Neg, -a.val_, {{&a, T(-1.0)}});
    }
    Var& operator+=(const Var& o) { return *this = *this + o; }
    Var& operator-=(const Var& o) { return *this = *this - o; }
    Var& operator*=(const Var& o) { return *this = *this * o; }
    Var& operator/=(const Var& o) { return *this = *this / o; }

    friend Var exp(const Var& a) {
        using std::exp;
        const T e = exp(a.val_);
        if (a.is_constant()) return constant(e);
        return a.tape_->make(OpKind::Exp, e, {{&a, e}});
    }
    friend Var log(const Var& a) {
        using std::log;
        const T l = log(a.val_);
        if (a.is_constant()) return constant(l);
        return a.tape_->make(OpKind::Log, l, {{&a, T(1.0) / a.val_}});
    }
    friend Var sqrt(const Var& a) {
        using std::sqrt;
        const T s = sqrt(a.val_);
        if (a.is_constant()) return constant(s);
        return a.tape_->make(OpKind::Sqrt, s, {{&a, T(0.5) / s}});
    }
    friend Var pow(const Var& a, double p) {
        using std::pow;
        const T r = pow(a.val_, p);
        if (a.is_constant()) return constant(r);
        // p * a^(p-1), evaluated without dividing by a so a = 0 stays finite.
        const T slope = p == 1.0 ? T(1.0) : T(p) * pow(a.val_, p - 1.0);
        return a.tape_->make(OpKind::Pow, r, {{&a, slope}});
    }
    friend Var sigmoid(const Var& a) {
        using std::exp;
        const T s = T(1.0) / (T(1.0) + exp(-a.val_));
        if (a.is_constant()) return constant(s);
        return a.tape_->make(OpKind::Sigmoid, s, {{&a, s * (T(1.0) - s)}});
    }
    // max(0, x); the derivative at exactly 0 is 0.
    friend Var max0(const Var& a) {
        if (a.primal_value() > 0.0) return a;
        return constant(T(0.0));
    }
    friend Var clamp(const Var& a, double lo, double hi) {
        const double v = a.primal_value();
        if (v < lo) return constant(T(lo));
        if (v > hi) return constant(T(hi));
        return a;
    }
    friend Var abs(const Var& a) {
        const double v = a.primal_value();
        if (a.is_constant()) return constant(v < 0.0 ? -a.val_ : a.val_);
        const double s = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        return a.tape_->make(OpKind::Abs, v < 0.0 ? -a.val_ : a.val_, {{&a, T(s)}});
    }

private:
    static Tape<T>* owner(const Var& a, const Var& b) { return a.tape_ ? a.tape_ : b.tape_; }

    T val_{};
    Tape<T>* tape_ = nullptr;
    std::uint32_t id_ = kConstant;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double max0(double x) { return x > 0.0 ? x : 0.0; }
inline double clamp(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

template <class T>
double primal(const Var<T>& v) {
    return v.primal_value();
}

// Append-only record of elementary operations. Each node stores its value and
// the local partials with respect to its inputs; fused operations register a
// custom backward over a contiguous range of output nodes.
template <class T>
class Tape {
public:
    using Backward = std::function<void(std::span<T> adjoints)>;

    struct Edge {
        std::uint32_t input;
        T partial;
    };
    struct Input {
        const Var<T>* var;
        T partial;
    };

    Tape() {
        values_.reserve(1 << 14);
        nodes_.reserve(1 << 14);
        edges_.reserve(1 << 15);
    }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> leaf(const T& value) { return make(OpKind::Leaf, value, {}); }

    std::vector<Var<T>> leaves(std::span<const T> values) {
        std::vector<Var<T>> out;
        out.reserve(values.size());
        for (const T& v : values) out.push_back(leaf(v));
        return out;
    }

    Var<T> make(OpKind kind, const T& value, std::initializer_list<Input> inputs) {
        const auto id = begin_node(kind, value);
        for (const Input& in : inputs) add_edge(*in.var, in.partial);
        return {value, this, id};
    }

    // n-ary node: caller appends edges with add_edge right after begin_node.
    std::uint32_t begin_node(OpKind kind, const T& value) {
        if (!is_finite(value)) throw NonFiniteError(op_name(kind), false);
        const auto id = static_cast<std::uint32_t>(nodes_.size());
        const auto e = static_cast<std::uint32_t>(edges_.size());
        nodes_.push_back({e, e, kind, 0});
        values_.push_back(value);
        return id;
    }
    void add_edge(const Var<T>& input, const T& partial) {
        if (input.is_constant()) return;
        edges_.push_back({input.id(), partial});
        nodes_.back().edge_end = static_cast<std::uint32_t>(edges_.size());
    }
    Var<T> finish_node(std::uint32_t id) { return {values_[id], this, id}; }

    // Registers a fused op with the given output values; returns the output
    // variables. The backward reads output adjoints and accumulates into inputs.
    std::vector<Var<T>> custom(const char* name, std::span<const T> outputs, Backward backward) {
        const auto first = static_cast<std::uint32_t>(nodes_.size());
        const auto index = static_cast<std::uint32_t>(customs_.size());
        std::vector<Var<T>> vars;
        vars.reserve(outputs.size());
        for (const T& v : outputs) {
            if (!is_finite(v)) throw NonFiniteError(name, false);
            const auto id = static_cast<std::uint32_t>(nodes_.size());
            const auto e = static_cast<std::uint32_t>(edges_.size());
            nodes_.push_back({e, e, OpKind::Custom, index});
            values_.push_back(v);
            vars.emplace_back(v, this, id);
        }
        customs_.push_back({name, first, static_cast<std::uint32_t>(nodes_.size()), std::move(backward)});
        return vars;
    }

    const T& value(std::uint32_t id) const { return values_[id]; }
    std::size_t node_count() const { return nodes_.size(); }

    void set_frozen(FrozenValues* frozen) { frozen_ = frozen; }
    // Routes stop-gradient values through the frozen store, when one is set.
    void freeze(std::span<double> values) const {
        if (frozen_ != nullptr) frozen_->process(values);
    }

    // Reverse sweep from `root`. Each node up to root is visited once.
    std::vector<T> adjoints(const Var<T>& root) const {
        std::vector<T> adj(nodes_.size(), T(0.0));
        if (root.is_constant()) return adj;
        adj[root.id()] = T(1.0);
        for (std::int64_t i = root.id(); i >= 0; --i) {
            const Node& node = nodes_[static_cast<std::size_t>(i)];
            if (node.kind == OpKind::Custom) {
                const CustomOp& op = customs_[node.custom];
                for (std::uint32_t k = op.first; k < op.end; ++k) {
                    if (!is_finite(adj[k])) throw NonFiniteError(op.name, true);
                }
                op.backward(std::span<T>(adj));
                i = op.first;
                continue;
            }
            const T a = adj[static_cast<std::size_t>(i)];
            if (!is_finite(a)) throw NonFiniteError(op_name(node.kind), true);
            if (is_zero(a)) continue;
            for (std::uint32_t e = node.edge_begin; e < node.edge_end; ++e) {
                adj[edges_[e].input] += edges_[e].partial * a;
            }
        }
        return adj;
    }

private:
    struct Node {
        std::uint32_t edge_begin;
        std::uint32_t edge_end;
        OpKind kind;
        std::uint32_t custom;
    };
    struct CustomOp {
        const char* name;
        std::uint32_t first;
        std::uint32_t end;
        Backward backward;
    };

    std::vector<T> values_;
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::vector<CustomOp> customs_;
    FrozenValues* frozen_ = nullptr;
};

// Sum of many variables as a single node.
template <class T>
Var<T> sum(std::span<const Var<T>> xs) {
    T total(0.0);
    Tape<T>* tape = nullptr;
    for (const auto& x : xs) {
        total += x.value();
        if (!x.is_constant()) tape = x.tape();
    }
    if (tape == nullptr) return Var<T>::constant(total);
    const auto id = tape->begin_node(OpKind::Sum, total);
    for (const auto& x : xs) tape->add_edge(x, T(1.0));
    return tape->finish_node(id);
}

// Binary entropy -(a log a + (1-a) log(1-a)) of a clamped to [lo, 1-lo].
template <class T>
Var<T> binary_entropy(const Var<T>& a, double lo) {
    using std::log;
    const double v = a.primal_value();
    const bool clamped = v < lo || v > 1.0 - lo;
    const T x = v < lo ? T(lo) : (v > 1.0 - lo ? T(1.0 - lo) : a.value());
    const T h = -(x * log(x) + (T(1.0) - x) * log(T(1.0) - x));
    if (a.is_constant() || clamped) return Var<T>::constant(h);
    return a.tape()->make(OpKind::Entropy, h, {{&a, log((T(1.0) - x) / x)}});
}

inline double binary_entropy(double a, double lo) {
    const double x = clamp(a, lo, 1.0 - lo);
    return -(x * std::log(x) + (1.0 - x) * std::log(1.0 - x));
}

}  // namespace phong_splat
