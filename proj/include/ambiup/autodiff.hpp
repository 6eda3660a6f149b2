#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ambiup/tensor.hpp"

namespace ambiup::ad {

/// Define-by-run reverse-mode tape. Every op records its output value and a
/// closure that scatters the output gradient back into its parents. Creation
/// order is the topological order, so backward() is a single reverse sweep.
///
/// Node handles are plain ints. Feature maps use the [channels x time]
/// layout; vectors are [n x 1] columns.
class Tape {
public:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, int)> backward;
        bool needs_grad = false;
    };

    int leaf(Tensor value, bool requires_grad = false);

    const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    Tensor& grad_mut(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
    bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Seeds d(root)=1 (root must be scalar) and pulls gradients back through
    /// every recorded node. Gradients of unreached nodes are zero.
    void backward(int root);

    // --- elementwise / linear algebra -------------------------------------
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int a, double c);
    int add_const(int a, const Tensor& c);
    int relu(int a);
    int sigmoid(int a);
    int tanh_act(int a);
    int exp_act(int a);
    int matmul(int a, int b);
    int transpose(int a);

    // --- feature-map helpers ([C x T]) -------------------------------------
    int add_bias(int x, int bias);            // bias [C x 1] added to every column
    int mean_time(int x);                     // -> [C x 1]
    int broadcast_time(int v, int t);         // [C x 1] -> [C x T]
    int mul_bcast_rows(int x, int v);         // x .* v, v broadcast over columns
    int concat_rows(int a, int b);
    int slice_rows(int x, int r0, int r1);
    int slice_cols(int x, int c0, int c1);
    int concat_cols(const std::vector<int>& xs);
    int softmax_rows(int x);                  // softmax along every row
    int layer_norm_cols(int x, int gamma, int beta, double eps = 1e-5);

    // --- convolutions -------------------------------------------------------
    /// x [Cin x L], w [Cout x Cin x K], bias [Cout x 1]; zero padding.
    int conv1d(int x, int w, int bias, int stride, int pad_left, int pad_right);
    /// Transposed conv: x [Cin x L], w [Cin x Cout x K], bias [Cout x 1].
    /// Produces (L-1)*stride + K samples, then trims trim_left/right.
    int conv_transpose1d(int x, int w, int bias, int stride, int trim_left, int trim_right);

    // --- reductions / custom ------------------------------------------------
    int sum_all(int x);
    /// Generic escape hatch for custom ops (used by the loss terms).
    int custom(Tensor value, std::vector<int> parents,
               std::function<void(Tape&, int, const std::vector<int>&)> backward_fn);

private:
    int push(Tensor value, bool needs_grad, std::function<void(Tape&, int)> backward);
    std::vector<Node> nodes_;
};

/// Throws std::runtime_error naming `what` if any element is not finite.
void check_finite(const Tensor& t, const std::string& what);

}  // namespace ambiup::ad
