#pragma once
#include <memory>
#include <vector>

#include "oacnn/errors.hpp"
#include "oacnn/matrix.hpp"

namespace oacnn {

// A value in the computation graph: a feature matrix plus its cotangent.
template <class Real>
struct Var {
    Matrix<Real> value;
    Matrix<Real> grad;

    Var() = default;
    explicit Var(Matrix<Real> v) : value(std::move(v)), grad(value.rows, value.cols) {}
};

template <class Real>
using VarPtr = std::shared_ptr<Var<Real>>;

template <class Real>
VarPtr<Real> make_var(Matrix<Real> m) {
    return std::make_shared<Var<Real>>(std::move(m));
}

// Record of forward operations. Ops are appended in execution order, which is
// a topological order of the graph; backward() visits each node exactly once
// in reverse. Ops hold shared ownership of the Vars (and any maps/partitions)
// they need, so intermediates stay alive until the tape is cleared.
template <class Real>
class Tape {
  public:
    struct OpNode {
        virtual ~OpNode() = default;
        virtual void backward() = 0;
    };

    void record(std::unique_ptr<OpNode> node) { nodes_.push_back(std::move(node)); }

    void backward() {
        if (nodes_.empty()) throw TapeError("backward on a tape with no recorded ops");
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)->backward();
    }

    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

  private:
    std::vector<std::unique_ptr<OpNode>> nodes_;
};

} // namespace oacnn
