// Benchmark of the OpenMP kernels against their serial references:
// contrastive loss, SuperClass regularizer, batch threshold, relabeling.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "hypow/losses.hpp"
#include "hypow/relabel.hpp"

using namespace hypow;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Vec random_ball_point(int dim, Curvature c, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 0.9);
  Vec v(static_cast<std::size_t>(dim));
  for (double& x : v) x = g(rng);
  const double n = norm(v);
  const double target = u(rng) / std::sqrt(c.value());
  for (double& x : v) x *= target / n;
  return v;
}

double max_abs_diff(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j)
      m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  const int dim = argc > 1 ? std::atoi(argv[1]) : 32;
  const int batch_size = argc > 2 ? std::atoi(argv[2]) : 96;
  const int classes = 24;
  const int per_class = 10;
  const int repeats = 5;

  LossConfig cfg;
  const Curvature c = cfg.curvature;
  Rng rng(42);

  ReplayBuffer buffer(per_class);
  CategoryMap categories([&] {
    std::map<int, int> m;
    for (int cls = 0; cls < classes; ++cls) m[cls] = cls % 6;
    return m;
  }());
  for (int cls = 0; cls < classes; ++cls)
    for (int i = 0; i < per_class; ++i)
      buffer.push(cls, random_ball_point(dim, c, rng));

  std::vector<LabeledEmbedding> batch;
  for (int i = 0; i < batch_size; ++i)
    batch.push_back(LabeledEmbedding{random_ball_point(dim, c, rng), i % classes,
                                     Source::Batch});

  std::printf("kernel benchmark: dim=%d batch=%d buffer=%dx%d repeats=%d\n",
              dim, batch_size, classes, per_class, repeats);

  {
    auto t0 = Clock::now();
    LossValue par;
    for (int i = 0; i < repeats; ++i) {
      Rng r(7);
      par = hyp_contrastive_loss(batch, buffer, cfg, r);
    }
    const double t_par = ms_since(t0) / repeats;
    t0 = Clock::now();
    LossValue ser;
    for (int i = 0; i < repeats; ++i) {
      Rng r(7);
      ser = ref::hyp_contrastive_loss(batch, buffer, cfg, r);
    }
    const double t_ser = ms_since(t0) / repeats;
    std::printf(
        "contrastive loss:   omp %8.2f ms   serial %8.2f ms   speedup %5.2fx  "
        " |dloss|=%.2e  |dgrad|=%.2e\n",
        t_par, t_ser, t_ser / t_par, std::abs(par.value - ser.value),
        max_abs_diff(par.grads, ser.grads));
  }

  {
    auto t0 = Clock::now();
    LossValue par;
    for (int i = 0; i < repeats; ++i)
      par = superclass_reg_loss(batch, buffer, categories, cfg);
    const double t_par = ms_since(t0) / repeats;
    t0 = Clock::now();
    LossValue ser;
    for (int i = 0; i < repeats; ++i)
      ser = ref::superclass_reg_loss(batch, buffer, categories, cfg);
    const double t_ser = ms_since(t0) / repeats;
    std::printf(
        "superclass reg:     omp %8.2f ms   serial %8.2f ms   speedup %5.2fx  "
        " |dloss|=%.2e  |dgrad|=%.2e\n",
        t_par, t_ser, t_ser / t_par, std::abs(par.value - ser.value),
        max_abs_diff(par.grads, ser.grads));
  }

  {
    const CentroidSet centroids = class_centroids(buffer, c);
    std::vector<Vec> matched, unmatched;
    for (int i = 0; i < batch_size * 4; ++i)
      matched.push_back(random_ball_point(dim, c, rng));
    for (int i = 0; i < batch_size * 16; ++i)
      unmatched.push_back(random_ball_point(dim, c, rng));

    auto t0 = Clock::now();
    double d_par = 0;
    for (int i = 0; i < repeats; ++i)
      d_par = batch_threshold(matched, centroids, c).value_or(0.0);
    const double t_par = ms_since(t0) / repeats;
    t0 = Clock::now();
    double d_ser = 0;
    for (int i = 0; i < repeats; ++i)
      d_ser = ref::batch_threshold(matched, centroids, c).value_or(0.0);
    const double t_ser = ms_since(t0) / repeats;
    std::printf(
        "batch threshold:    omp %8.2f ms   serial %8.2f ms   speedup %5.2fx  "
        " |ddelta|=%.2e\n",
        t_par, t_ser, t_ser / t_par, std::abs(d_par - d_ser));

    t0 = Clock::now();
    std::vector<int> r_par;
    for (int i = 0; i < repeats; ++i)
      r_par = relabel_unmatched(unmatched, centroids, d_par, c);
    const double t_par2 = ms_since(t0) / repeats;
    t0 = Clock::now();
    std::vector<int> r_ser;
    for (int i = 0; i < repeats; ++i)
      r_ser = ref::relabel_unmatched(unmatched, centroids, d_ser, c);
    const double t_ser2 = ms_since(t0) / repeats;
    std::printf(
        "relabel unmatched:  omp %8.2f ms   serial %8.2f ms   speedup %5.2fx  "
        " sets %s\n",
        t_par2, t_ser2, t_ser2 / t_par2,
        r_par == r_ser ? "identical" : "DIFFER");
  }
  return 0;
}
