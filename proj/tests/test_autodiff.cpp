#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "ambiup/autodiff.hpp"
#include "ambiup/loss.hpp"
#include "ambiup/rng.hpp"
#include "test_util.hpp"

using namespace ambiup;
using namespace ambiup::ad;
using namespace ambiup::testutil;

namespace {

Tensor random_tensor(std::vector<int> shape, Pcg64& rng, double amp = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(-amp, amp);
    return t;
}

/// Central finite differences of a scalar-graph builder against the analytic
/// gradient, entry by entry.
void check_gradient(const std::vector<Tensor>& inputs,
                    const std::function<int(Tape&, const std::vector<int>&)>& build,
                    double tol = 1e-7, double h = 1e-6) {
    Tape tape;
    std::vector<int> ids;
    for (const auto& t : inputs) ids.push_back(tape.leaf(t, true));
    const int root = build(tape, ids);
    REQUIRE(tape.val(root).numel() == 1);
    tape.backward(root);

    for (std::size_t which = 0; which < inputs.size(); ++which) {
        const Tensor& analytic = tape.grad(ids[which]);
        for (std::size_t j = 0; j < inputs[which].numel(); ++j) {
            auto eval = [&](double delta) {
                std::vector<Tensor> shifted = inputs;
                shifted[which].data[j] += delta;
                Tape t2;
                std::vector<int> ids2;
                for (const auto& t : shifted) ids2.push_back(t2.leaf(t, true));
                return t2.val(build(t2, ids2)).data[0];
            };
            const double fd = (eval(h) - eval(-h)) / (2.0 * h);
            const double got = analytic.data[j];
            const double scale = std::max({std::abs(fd), std::abs(got), 1.0});
            CHECK(std::abs(fd - got) / scale < tol);
        }
    }
}

}  // namespace

TEST_CASE("elementwise op gradients") {
    Pcg64 rng(1);
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({3, 4}, rng);

    check_gradient({a, b}, [](Tape& t, const std::vector<int>& in) {
        return t.sum_all(t.mul(t.add(in[0], in[1]), t.sub(in[0], in[1])));
    });
    check_gradient({a}, [](Tape& t, const std::vector<int>& in) {
        return t.sum_all(t.sigmoid(t.scale(in[0], 1.7)));
    });
    check_gradient({a}, [](Tape& t, const std::vector<int>& in) {
        return t.sum_all(t.tanh_act(in[0]));
    });
    check_gradient({a}, [](Tape& t, const std::vector<int>& in) {
        return t.sum_all(t.exp_act(t.scale(in[0], 0.5)));
    });
    // relu: nudge values away from the kink first
    Tensor c = a;
    for (auto& v : c.data) v += (v >= 0 ? 0.5 : -0.5);
    check_gradient({c}, [](Tape& t, const std::vector<int>& in) {
        return t.sum_all(t.relu(in[0]));
    });
}

TEST_CASE("matmul and transpose gradients") {
    Pcg64 rng(2);
    const Tensor a = random_tensor({3, 5}, rng);
    const Tensor b = random_tensor({5, 2}, rng);
    check_gradient({a, b}, [](Tape& t, const std::vector<int>& in) {
        return t.sum_all(t.matmul(in[0], in[1]));
    });
    check_gradient({a, b}, [](Tape& t, const std::vector<int>& in) {
        // weighted sum so the gradient is non-uniform
        const int prod = t.matmul(in[0], in[1]);
        return t.sum_all(t.mul(prod, prod));
    });
    check_gradient({a}, [](Tape& t, const std::vector<int>& in) {
        const int tr = t.transpose(in[0]);
        return t.sum_all(t.mul(tr, tr));
    });
}

TEST_CASE("broadcast, pooling, slicing and concatenation gradients") {
    Pcg64 rng(3);
    const Tensor x = random_tensor({4, 6}, rng);
    const Tensor v = random_tensor({4, 1}, rng);

    check_gradient({x, v}, [](Tape& t, const std::vector<int>& in) {
        return t.sum_all(t.mul(t.add_bias(in[0], in[1]), in[0]));
    });
    check_gradient({x}, [](Tape& t, const std::vector<int>& in) {
        const int m = t.mean_time(in[0]);
        return t.sum_all(t.mul(m, m));
    });
    check_gradient({v}, [](Tape& t, const std::vector<int>& in) {
        const int b = t.broadcast_time(in[0], 5);
        return t.sum_all(t.mul(b, b));
    });
    check_gradient({x, v}, [](Tape& t, const std::vector<int>& in) {
        const int m = t.mul_bcast_rows(in[0], in[1]);
        return t.sum_all(t.mul(m, m));
    });
    check_gradient({x}, [](Tape& t, const std::vector<int>& in) {
        const int top = t.slice_rows(in[0], 0, 2);
        const int bottom = t.slice_rows(in[0], 2, 4);
        return t.sum_all(t.mul(t.concat_rows(bottom, top), in[0]));
    });
    check_gradient({x}, [](Tape& t, const std::vector<int>& in) {
        const int left = t.slice_cols(in[0], 0, 3);
        const int right = t.slice_cols(in[0], 3, 6);
        const int swapped = t.concat_cols({right, left});
        return t.sum_all(t.mul(swapped, swapped));
    });
}

TEST_CASE("softmax and layer norm gradients") {
    Pcg64 rng(4);
    const Tensor x = random_tensor({3, 5}, rng);
    const Tensor g = random_tensor({3, 1}, rng, 0.5);
    Tensor gamma = g;
    for (auto& vv : gamma.data) vv += 1.0;
    const Tensor beta = random_tensor({3, 1}, rng, 0.5);

    check_gradient({x}, [](Tape& t, const std::vector<int>& in) {
        const int s = t.softmax_rows(in[0]);
        return t.sum_all(t.mul(s, in[0]));
    });
    check_gradient({x, gamma, beta}, [](Tape& t, const std::vector<int>& in) {
        const int ln = t.layer_norm_cols(in[0], in[1], in[2]);
        return t.sum_all(t.mul(ln, ln));
    }, 1e-5, 1e-6);

    SUBCASE("softmax rows sum to one") {
        Tape tape;
        const int s = tape.softmax_rows(tape.leaf(x));
        for (int i = 0; i < 3; ++i) {
            double acc = 0.0;
            for (int j = 0; j < 5; ++j) acc += tape.val(s).row(i)[j];
            CHECK(acc == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("conv1d gradients across strides and paddings") {
    Pcg64 rng(5);
    for (const auto& [cin, cout, k, stride, len] :
         {std::tuple{1, 2, 7, 1, 12}, {2, 3, 3, 1, 9}, {2, 4, 4, 2, 8}, {3, 2, 10, 5, 10},
          {2, 2, 16, 8, 16}, {2, 2, 7, 1, 1}}) {
        const Tensor x = random_tensor({cin, len}, rng);
        const Tensor w = random_tensor({cout, cin, k}, rng);
        const Tensor b = random_tensor({cout, 1}, rng);
        const int pad_l = (stride > 1) ? stride / 2 : (k - 1) / 2;
        const int pad_r = (stride > 1) ? stride - stride / 2 : k / 2;
        check_gradient({x, w, b}, [=](Tape& t, const std::vector<int>& in) {
            const int c = t.conv1d(in[0], in[1], in[2], stride, pad_l, pad_r);
            return t.sum_all(t.mul(c, c));
        });
    }
}

TEST_CASE("conv_transpose1d gradients") {
    Pcg64 rng(6);
    for (const auto& [cin, cout, stride, len] :
         {std::tuple{2, 3, 2, 5}, {3, 2, 5, 4}, {2, 2, 8, 3}}) {
        const int k = 2 * stride;
        const Tensor x = random_tensor({cin, len}, rng);
        const Tensor w = random_tensor({cin, cout, k}, rng);
        const Tensor b = random_tensor({cout, 1}, rng);
        const int trim_l = stride / 2, trim_r = stride - stride / 2;
        check_gradient({x, w, b}, [=](Tape& t, const std::vector<int>& in) {
            const int c = t.conv_transpose1d(in[0], in[1], in[2], stride, trim_l, trim_r);
            return t.sum_all(t.mul(c, c));
        });
    }
}

TEST_CASE("conv shapes: stride-s conv maps L to L/s and its transpose maps back") {
    Pcg64 rng(7);
    Tape tape;
    const int x = tape.leaf(random_tensor({2, 40}, rng));
    for (int s : {2, 4, 5, 8}) {
        const int w = tape.leaf(random_tensor({4, 2, 2 * s}, rng));
        const int b = tape.leaf(random_tensor({4, 1}, rng));
        const int y = tape.conv1d(x, w, b, s, s / 2, s - s / 2);
        CHECK(tape.val(y).cols() == 40 / s);

        const int wt = tape.leaf(random_tensor({2, 3, 2 * s}, rng));
        const int bt = tape.leaf(random_tensor({3, 1}, rng));
        const int up = tape.conv_transpose1d(x, wt, bt, s, s / 2, s - s / 2);
        CHECK(tape.val(up).cols() == 40 * s);
    }
}

TEST_CASE("loss node gradients") {
    Pcg64 rng(8);
    const Tensor pred = random_tensor({2, 200}, rng, 0.5);
    const Tensor target = random_tensor({2, 200}, rng, 0.5);
    StftLossConfig cfg;
    cfg.fft_sizes = {64};
    cfg.window_sizes = {32};
    cfg.hop_sizes = {8};

    check_gradient({pred}, [&](Tape& t, const std::vector<int>& in) {
        return stft_l1_node(t, in[0], target, cfg);
    }, 1e-4, 1e-6);

    check_gradient({pred}, [&](Tape& t, const std::vector<int>& in) {
        return l2_node(t, in[0], target);
    });

    const Tensor mu = random_tensor({6, 1}, rng);
    const Tensor lv = random_tensor({6, 1}, rng);
    check_gradient({mu, lv}, [](Tape& t, const std::vector<int>& in) {
        return kl_node(t, in[0], in[1]);
    });
}

TEST_CASE("backward leaves unreached parameters with zero gradients") {
    Tape tape;
    const int used = tape.leaf(Tensor::scalar(3.0), true);
    const int unused = tape.leaf(Tensor::scalar(5.0), true);
    const int loss = tape.sum_all(tape.mul(used, used));
    tape.backward(loss);
    CHECK(tape.grad(used).data[0] == doctest::Approx(6.0));
    CHECK(tape.grad(unused).data[0] == 0.0);
}

TEST_CASE("f(p) = p^2 at p = 3 has gradient 6") {
    Tape tape;
    const int p = tape.leaf(Tensor::scalar(3.0), true);
    const int loss = tape.mul(p, p);
    tape.backward(loss);
    CHECK(tape.grad(p).data[0] == doctest::Approx(6.0));
}

TEST_CASE("gradients do not flow into constant leaves") {
    // A prior sample enters the graph as a plain leaf; backward must not
    // attribute anything to it even when it shapes the loss.
    Tape tape;
    const int param = tape.leaf(Tensor::scalar(2.0), true);
    const int prior = tape.leaf(Tensor::scalar(0.7), false);
    const int loss = tape.sum_all(tape.mul(tape.add(param, prior), tape.add(param, prior)));
    tape.backward(loss);
    CHECK(tape.grad(prior).data[0] == 0.0);
    CHECK(tape.grad(param).data[0] == doctest::Approx(2.0 * 2.7));
}
