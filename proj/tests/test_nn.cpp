#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "wsc/nn.hpp"
#include "wsc/rng.hpp"

namespace {

using wsc::Affine;
using wsc::ParamRegistry;
using wsc::Rng;
using wsc::Sgd;
using Vec = wsc::Vec<double>;
using Mat = wsc::RowMat<double>;

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/wsc_nn_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("softmax cross entropy", "[nn]") {
  SECTION("uniform logits give log(l) and centered gradient") {
    for (int l : {2, 3, 7}) {
      Mat logits = Mat::Constant(1, l, 0.37);
      const auto r = wsc::softmax_cross_entropy(logits, {0});
      REQUIRE(r.loss == Catch::Approx(std::log(double(l))).epsilon(1e-12));
      REQUIRE(r.grad(0, 0) == Catch::Approx(1.0 / l - 1.0).epsilon(1e-12));
      for (int j = 1; j < l; ++j)
        REQUIRE(r.grad(0, j) == Catch::Approx(1.0 / l).epsilon(1e-12));
    }
  }

  SECTION("confident correct prediction drives loss to zero") {
    Mat logits(1, 2);
    logits << 40.0, -40.0;
    const auto r = wsc::softmax_cross_entropy(logits, {0});
    REQUIRE(r.loss >= 0.0);
    REQUIRE(r.loss < 1e-12);
  }

  SECTION("loss is mean over rows and matches hand value") {
    Mat logits(2, 2);
    logits << 1.0, -1.0, 0.5, 0.5;
    const auto r = wsc::softmax_cross_entropy(logits, {1, 0});
    const double row0 = std::log(1.0 + std::exp(2.0));  // -log softmax_1
    const double row1 = std::log(2.0);
    REQUIRE(r.loss == Catch::Approx(0.5 * (row0 + row1)).epsilon(1e-12));
  }

  SECTION("gradient matches finite differences") {
    Rng rng = Rng::from_key(11, {0});
    Mat logits(3, 4);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) logits(i, j) = rng.normal();
    const std::vector<int> labels = {2, 0, 3};
    const auto r = wsc::softmax_cross_entropy(logits, labels);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) {
        Mat up = logits, dn = logits;
        up(i, j) += h;
        dn(i, j) -= h;
        const double fd = (wsc::softmax_cross_entropy(up, labels).loss -
                           wsc::softmax_cross_entropy(dn, labels).loss) /
                          (2 * h);
        REQUIRE(rel_err(r.grad(i, j), fd) < 1e-6);
      }
  }

  SECTION("rejects bad labels and non-finite logits") {
    Mat logits = Mat::Zero(1, 2);
    REQUIRE_THROWS_AS(wsc::softmax_cross_entropy(logits, {2}), wsc::DomainError);
    REQUIRE_THROWS_AS(wsc::softmax_cross_entropy(logits, {-1}), wsc::DomainError);
    REQUIRE_THROWS_AS(wsc::softmax_cross_entropy(logits, {0, 1}), wsc::DomainError);
    logits(0, 1) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(wsc::softmax_cross_entropy(logits, {0}), wsc::NumericError);
  }
}

TEST_CASE("affine layer", "[nn]") {
  Rng rng = Rng::from_key(12, {0});

  SECTION("forward is Wx + b") {
    auto a = Affine<double>::init(2, 3, rng);
    a.w << 1, 2, 3, 4, 5, 6;
    a.b << 0.5, -0.5, 0.0;
    Vec x(2);
    x << 1.0, -1.0;
    const Vec y = a.forward(x);
    REQUIRE(y[0] == Catch::Approx(1 - 2 + 0.5));
    REQUIRE(y[1] == Catch::Approx(3 - 4 - 0.5));
    REQUIRE(y[2] == Catch::Approx(5 - 6 + 0.0));
  }

  SECTION("init: fan-in-bounded weights, small uniform bias") {
    auto a = Affine<double>::init(30, 20, rng);
    const double limit = std::sqrt(6.0 / 30.0);
    REQUIRE(a.w.cwiseAbs().maxCoeff() <= limit);
    REQUIRE(a.w.cwiseAbs().maxCoeff() > 0.5 * limit);  // not suspiciously tiny
    REQUIRE(a.b.minCoeff() == a.b.maxCoeff());  // one constant for every unit
    REQUIRE(a.b[0] > 0.0);
    REQUIRE(a.b[0] <= 0.1);
    REQUIRE(a.grad_w.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("backward matches finite differences of a scalarized output") {
    auto a = Affine<double>::init(4, 3, rng);
    Vec x(4), probe(3);
    for (int i = 0; i < 4; ++i) x[i] = rng.normal();
    for (int i = 0; i < 3; ++i) probe[i] = rng.normal();
    const Vec dx = a.backward(x, probe);  // loss = probe . (Wx + b)

    const double h = 1e-6;
    auto value = [&]() { return probe.dot(a.forward(x)); };
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) {
        const double keep = a.w(i, j);
        a.w(i, j) = keep + h;
        const double up = value();
        a.w(i, j) = keep - h;
        const double dn = value();
        a.w(i, j) = keep;
        REQUIRE(rel_err(a.grad_w(i, j), (up - dn) / (2 * h)) < 1e-6);
      }
    for (int i = 0; i < 3; ++i) REQUIRE(rel_err(a.grad_b[i], probe[i]) < 1e-12);
    for (int j = 0; j < 4; ++j) {
      const double keep = x[j];
      x[j] = keep + h;
      const double up = value();
      x[j] = keep - h;
      const double dn = value();
      x[j] = keep;
      REQUIRE(rel_err(dx[j], (up - dn) / (2 * h)) < 1e-6);
    }
  }

  SECTION("backward accumulates across calls") {
    auto a = Affine<double>::init(2, 2, rng);
    Vec x(2), g(2);
    x << 1.0, 2.0;
    g << 0.3, -0.7;
    (void)a.backward(x, g);
    const Mat once = a.grad_w;
    (void)a.backward(x, g);
    REQUIRE(a.grad_w.isApprox(2.0 * once, 1e-14));
  }

  SECTION("shape errors") {
    auto a = Affine<double>::init(3, 2, rng);
    REQUIRE_THROWS_AS(a.forward(Vec::Zero(4)), wsc::DomainError);
    REQUIRE_THROWS_AS(Affine<double>::init(0, 2, rng), wsc::ConfigError);
  }
}

TEST_CASE("relu and its backward", "[nn]") {
  Vec x(4);
  x << -1.0, 0.0, 2.0, -0.5;
  const Vec y = wsc::relu(x);
  REQUIRE(y[0] == 0.0);
  REQUIRE(y[1] == 0.0);
  REQUIRE(y[2] == 2.0);
  REQUIRE(y[3] == 0.0);
  Vec dy(4);
  dy << 5.0, 5.0, 5.0, 5.0;
  const Vec dx = wsc::relu_backward(x, dy);
  REQUIRE(dx[0] == 0.0);
  REQUIRE(dx[1] == 0.0);  // subgradient 0 at the kink
  REQUIRE(dx[2] == 5.0);
  REQUIRE(dx[3] == 0.0);
}

TEST_CASE("momentum sgd unrolls to the classic recurrence", "[nn]") {
  SECTION("two constant-gradient steps move by lr*g*(2+m)") {
    const double lr = 0.1, m = 0.95;
    Vec v(2), g(2);
    v << 1.0, -1.0;
    const Vec v0 = v;
    Sgd<double> opt(lr, m);
    std::vector<wsc::ParamView<double>> views = {{"p", v.data(), g.data(), 2}};
    g << 0.5, -0.25;
    const Vec g0 = g;
    opt.step(views);
    REQUIRE(g.cwiseAbs().maxCoeff() == 0.0);  // grads cleared by the step
    g = g0;
    opt.step(views);
    for (int i = 0; i < 2; ++i)
      REQUIRE(v[i] == Catch::Approx(v0[i] - lr * g0[i] * (2.0 + m)).epsilon(1e-12));
  }

  SECTION("zero momentum is plain sgd") {
    Vec v(1), g(1);
    v << 2.0;
    g << 4.0;
    Sgd<double> opt(0.5, 0.0);
    std::vector<wsc::ParamView<double>> views = {{"p", v.data(), g.data(), 1}};
    opt.step(views);
    REQUIRE(v[0] == Catch::Approx(0.0).margin(1e-15));
  }

  SECTION("invalid learning rate is rejected") {
    REQUIRE_THROWS_AS(Sgd<double>(0.0, 0.9), wsc::ConfigError);
  }
}

TEST_CASE("parameter registry", "[nn]") {
  Vec a(2), ga(2), b(3), gb(3);
  a.setOnes();
  ga.setOnes();
  b.setOnes();
  gb.setOnes();
  ParamRegistry<double> reg;
  reg.add("layer0.w", a.data(), ga.data(), 2);
  reg.add("layer0.b", b.data(), gb.data(), 3);

  SECTION("views preserve registration order") {
    REQUIRE(reg.views().size() == 2);
    REQUIRE(reg.views()[0].name == "layer0.w");
    REQUIRE(reg.views()[1].name == "layer0.b");
  }

  SECTION("duplicate names are usage errors") {
    REQUIRE_THROWS_AS(reg.add("layer0.w", b.data(), gb.data(), 3), wsc::UsageError);
  }

  SECTION("clear_grads zeroes every view") {
    reg.clear_grads();
    REQUIRE(ga.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(gb.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(a.cwiseAbs().minCoeff() == 1.0);  // values untouched
  }

  SECTION("null pointers are usage errors") {
    REQUIRE_THROWS_AS(reg.add("bad", nullptr, ga.data(), 2), wsc::UsageError);
  }
}

TEST_CASE("inverted dropout", "[nn]") {
  Rng rng = Rng::from_key(13, {0});

  SECTION("eval mode and rate zero are identity masks") {
    const Vec m1 = wsc::dropout_mask<double>(16, 0.5, /*training=*/false, rng);
    REQUIRE(m1.minCoeff() == 1.0);
    REQUIRE(m1.maxCoeff() == 1.0);
    const Vec m2 = wsc::dropout_mask<double>(16, 0.0, /*training=*/true, rng);
    REQUIRE(m2.minCoeff() == 1.0);
  }

  SECTION("large-sample drop rate and mean preservation") {
    const Eigen::Index n = 1000000;
    const Vec m = wsc::dropout_mask<double>(n, 0.5, true, rng);
    Eigen::Index zeros = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      REQUIRE((m[i] == 0.0 || m[i] == 2.0));
      if (m[i] == 0.0) ++zeros;
    }
    const double drop = double(zeros) / double(n);
    REQUIRE(std::abs(drop - 0.5) < 0.002);
    REQUIRE(std::abs(m.mean() - 1.0) < 0.005);  // E[mask] = 1 keeps activations unbiased
  }

  SECTION("rate one is a config error") {
    REQUIRE_THROWS_AS(wsc::dropout_mask<double>(4, 1.0, true, rng), wsc::ConfigError);
  }
}

TEST_CASE("checkpoint round trip", "[nn]") {
  Rng rng = Rng::from_key(14, {0});
  auto a = Affine<double>::init(3, 2, rng);
  ParamRegistry<double> reg;
  a.register_params(reg, "fc");

  SECTION("save then load restores every value and the config hash") {
    TempFile tmp("roundtrip.ckpt");
    const Mat w_saved = a.w;
    wsc::save_checkpoint(tmp.path, 0xdeadbeefULL, reg.views());
    a.w.setZero();
    a.b.setConstant(9.0);
    const std::uint64_t hash = wsc::load_checkpoint(tmp.path, reg.views());
    REQUIRE(hash == 0xdeadbeefULL);
    REQUIRE(a.w.isApprox(w_saved, 0.0));
    REQUIRE(a.b.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("bad magic is a format error") {
    TempFile tmp("magic.ckpt");
    std::ofstream(tmp.path) << "definitely not a checkpoint";
    REQUIRE_THROWS_AS(wsc::load_checkpoint(tmp.path, reg.views()), wsc::FormatError);
  }

  SECTION("truncation is a format error") {
    TempFile tmp("trunc.ckpt");
    wsc::save_checkpoint(tmp.path, 1, reg.views());
    std::ifstream in(tmp.path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(tmp.path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
    out.close();
    REQUIRE_THROWS_AS(wsc::load_checkpoint(tmp.path, reg.views()), wsc::FormatError);
  }

  SECTION("parameter-set mismatch is a format error") {
    TempFile tmp("mismatch.ckpt");
    wsc::save_checkpoint(tmp.path, 1, reg.views());
    ParamRegistry<double> other;
    auto b = Affine<double>::init(3, 2, rng);
    b.register_params(other, "different_prefix");
    REQUIRE_THROWS_AS(wsc::load_checkpoint(tmp.path, other.views()), wsc::FormatError);
  }

  SECTION("missing file is an io error") {
    REQUIRE_THROWS_AS(wsc::load_checkpoint("/nonexistent/nope.ckpt", reg.views()),
                      wsc::IoError);
  }
}

TEST_CASE("fnv1a is the reference 64-bit hash", "[nn]") {
  // Published reference values for the 64-bit FNV-1a offset basis and "a".
  REQUIRE(wsc::fnv1a("") == 0xcbf29ce484222325ULL);
  REQUIRE(wsc::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  REQUIRE(wsc::fnv1a("hello") != wsc::fnv1a("hellp"));
}
