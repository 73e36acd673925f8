#include "conjure/sde.hpp"

namespace conjure {

EulerMaruyama::EulerMaruyama(std::size_t substeps) : substeps_(substeps) {
  if (substeps == 0) throw std::invalid_argument("EulerMaruyama needs at least one substep");
}

std::string EulerMaruyama::name() const {
  return substeps_ == 1 ? "euler-maruyama" : "euler-maruyama(substeps=" + std::to_string(substeps_) + ")";
}

Vector EulerMaruyama::advance(const Vector& x, const Vector& score, std::size_t step,
                              const DiffusionSchedule& schedule, const ScoreFn& score_fn,
                              const Eigen::Ref<const Eigen::MatrixXd>& noise) const {
  if (noise.cols() != static_cast<Eigen::Index>(substeps_))
    throw std::invalid_argument("EulerMaruyama: wrong number of noise columns");
  const TimePoint grid = schedule.at(step);
  if (substeps_ == 1) return reverse_step(x, grid, schedule.dt(), score, noise.col(0));

  const double h = schedule.dt() / static_cast<double>(substeps_);
  Vector state = reverse_step(x, grid, h, score, noise.col(0));
  for (std::size_t j = 1; j < substeps_; ++j) {
    TimePoint tp = schedule.at_time(grid.t - static_cast<double>(j) * h);
    tp.step = step;
    const Vector s = score_fn(state, tp);
    state = reverse_step(state, tp, h, s, noise.col(static_cast<Eigen::Index>(j)));
  }
  return state;
}

Eigen::MatrixXd draw_noise(std::size_t dim, std::size_t steps, std::size_t draws_per_step, Rng& rng) {
  return standard_normal(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(steps * draws_per_step), rng);
}

Trajectory reverse_denoise(const Vector& xT, const ConditionId& y, const ConditionalScoreModel& model,
                           const DiffusionSchedule& schedule, const Eigen::MatrixXd& noise,
                           const ReverseSampler& sampler, std::uint64_t seed) {
  const std::size_t T = schedule.steps();
  const std::size_t n = sampler.draws_per_step();
  if (static_cast<std::size_t>(xT.size()) != model.dim())
    throw std::invalid_argument("reverse_denoise: xT dimension does not match the model");
  if (noise.rows() != xT.size() || static_cast<std::size_t>(noise.cols()) != T * n)
    throw std::invalid_argument("reverse_denoise: noise record has the wrong shape");

  auto evaluate = [&](const Vector& x, const TimePoint& tp) -> Vector {
    try {
      return model.score(x, tp, y);
    } catch (const ModelError&) {
      throw;
    } catch (const std::exception& e) {
      throw ModelError(e.what(), tp.step);
    }
  };

  Trajectory traj;
  traj.prompt = y;
  traj.seed = seed;
  traj.noise = noise;
  traj.times.reserve(T + 1);
  traj.states.reserve(T + 1);
  traj.scores.reserve(T);

  Vector x = xT;
  for (std::size_t step = T; step >= 1; --step) {
    const TimePoint tp = schedule.at(step);
    Vector s = evaluate(x, tp);
    const auto block = noise.middleCols(static_cast<Eigen::Index>((T - step) * n), static_cast<Eigen::Index>(n));
    Vector next = sampler.advance(x, s, step, schedule, evaluate, block);
    traj.times.push_back(tp.t);
    traj.states.push_back(std::move(x));
    traj.scores.push_back(std::move(s));
    x = std::move(next);
  }
  traj.times.push_back(0.0);
  traj.states.push_back(std::move(x));
  return traj;
}

Trajectory reverse_denoise(const Vector& xT, const ConditionId& y, const ConditionalScoreModel& model,
                           const DiffusionSchedule& schedule, std::uint64_t seed, const ReverseSampler& sampler) {
  Rng rng(seed);
  const Eigen::MatrixXd noise = draw_noise(static_cast<std::size_t>(xT.size()), schedule.steps(),
                                           sampler.draws_per_step(), rng);
  return reverse_denoise(xT, y, model, schedule, noise, sampler, seed);
}

}  // namespace conjure
