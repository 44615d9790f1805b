// SPDX-License-Identifier: Apache-2.0
#include "olqr/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "olqr/io.hpp"
#include "olqr/seeding.hpp"

namespace olqr {

DeltaMatrices delta_matrices(const DataMatrices& sampled, const DataMatrices& averaged) {
  if (!averaged.averaged) throw Error(ErrorCode::Mode, "delta_matrices: second argument must be an episode average");
  auto same = [](const MatrixXd& a, const MatrixXd& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
  if (!same(sampled.Dxx, averaged.Dxx) || !same(sampled.Ixx, averaged.Ixx) || !same(sampled.Ixu0, averaged.Ixu0))
    throw Error(ErrorCode::Shape, "delta_matrices: shape mismatch");
  return {sampled.Dxx - averaged.Dxx, sampled.Ixx - averaged.Ixx, sampled.Ixu0 - averaged.Ixu0};
}

double gamma1(const DeltaMatrices& d, const MatrixXd& K, const MatrixXd& R) {
  return spectral_norm(d.Dxx) + 2.0 * spectral_norm(d.Ixx) * spectral_norm(K.transpose() * R) +
         2.0 * spectral_norm(d.Ixu0) * spectral_norm(R);
}

MatrixXd delta_theta(const DeltaMatrices& d, const MatrixXd& K, const MatrixXd& R) {
  const auto n = K.cols();
  const MatrixXd I = MatrixXd::Identity(n, n);
  MatrixXd out(d.Dxx.rows(), d.Dxx.cols() + K.size());
  out << d.Dxx, -2.0 * d.Ixx * kron(I, K.transpose() * R) - 2.0 * d.Ixu0 * kron(I, R);
  return out;
}

double gamma2(const RegressionSystem& nominal, double gamma1_value, double delta_ixx_norm, const MatrixXd& Qbar) {
  const RankReport rank = rank_report(nominal.Theta, static_cast<int>(nominal.Theta.cols()));
  if (!rank.passed)
    throw ExcitationError("gamma2: nominal Theta is rank deficient", rank.required, rank.achieved);
  const double pinv = 1.0 / rank.singular_values(rank.singular_values.size() - 1);
  return pinv * pinv * nominal.Phi.norm() * gamma1_value + pinv * delta_ixx_norm * vec(Qbar).norm();
}

double regenerate_gamma2(const BoundRecord& r) {
  return r.theta_pinv_norm * r.theta_pinv_norm * r.phi_norm * r.gamma1 + r.theta_pinv_norm * r.norm_dIxx * r.qbar_vec_norm;
}

bool bound_holds_throughout(const BoundReport& rep) {
  return std::all_of(rep.records.begin(), rep.records.end(), [](const BoundRecord& r) { return r.bound_satisfied; });
}

bool premise_holds_throughout(const BoundReport& rep) {
  return std::all_of(rep.records.begin(), rep.records.end(),
                     [](const BoundRecord& r) { return r.gamma1_premise_holds; });
}

namespace {

DataMatrices batch_average(const LtiSystem& sys, const BoundSetup& setup, int episodes, std::uint64_t seed) {
  const auto trajs = generate_episodes(sys, setup.signal, episodes, setup.sim, seed, setup.workers);
  std::vector<DataMatrices> dms;
  dms.reserve(trajs.size());
  for (const auto& t : trajs) dms.push_back(build_matrices(t, false));
  return average_matrices(dms);
}

}  // namespace

BoundReport verify_bound(const LtiSystem& sys, const CostWeights& w, const BoundSetup& setup, int episodes,
                         std::uint64_t seed) {
  LtiSystem nominal_sys = sys;
  nominal_sys.sigma.setZero();

  DataMatrices nominal = build_matrices(simulate(nominal_sys, setup.signal, std::nullopt, setup.sim, 0), false);
  nominal.averaged = true;
  const DataMatrices averaged = batch_average(sys, setup, episodes, seed);
  const DataMatrices fresh = batch_average(sys, setup, episodes, derive_seed(seed, SeedStream::FreshBatch));
  const DeltaMatrices deltas = delta_matrices(fresh, averaged);

  const MatrixXd P_opt = kleinman_iterate(sys, w, setup.learner.K0).P();
  const MatrixXd P_opt_nom = learn_averaged(nominal, w, setup.learner).P();

  BoundReport rep;
  rep.seed = seed;
  rep.episodes = episodes;
  rep.optimum_gap = spectral_norm(P_opt - P_opt_nom);

  const double n_dxx = spectral_norm(deltas.Dxx), n_dixx = spectral_norm(deltas.Ixx),
               n_dixu = spectral_norm(deltas.Ixu0);
  MatrixXd K = setup.learner.K0;
  MatrixXd prev_P, prev_P_nom;
  for (int k = 0; k < setup.learner.max_iter; ++k) {
    const IterationSolution sol = solve_iteration(assemble_episodic(averaged, K, w));
    const RegressionSystem rs_nom = assemble_episodic(nominal, K, w);
    const IterationSolution sol_nom = solve_iteration(rs_nom);

    BoundRecord r;
    r.iteration = k;
    r.norm_dDxx = n_dxx;
    r.norm_dIxx = n_dixx;
    r.norm_dIxu0 = n_dixu;
    r.norm_dTheta = spectral_norm(delta_theta(deltas, K, w.R));
    r.gamma1 = gamma1(deltas, K, w.R);
    // Exact inequality up to rounding in the norms.
    r.gamma1_premise_holds = r.norm_dTheta <= r.gamma1 * (1.0 + 1e-12) + 1e-300;
    const MatrixXd Qbar = w.closed_loop_cost(K);
    r.gamma2 = gamma2(rs_nom, r.gamma1, n_dixx, Qbar);
    Eigen::JacobiSVD<MatrixXd> svd(rs_nom.Theta);
    r.theta_pinv_norm = 1.0 / svd.singularValues()(svd.singularValues().size() - 1);
    r.phi_norm = rs_nom.Phi.norm();
    r.qbar_vec_norm = vec(Qbar).norm();
    r.realized_error = (sol.z - sol_nom.z).norm();
    r.realized_gain_error = spectral_norm(sol.K_next - sol_nom.K_next);
    r.bound_satisfied = r.realized_error <= r.gamma2;
    r.p_error_to_optimum = spectral_norm(sol.P - P_opt);
    const MatrixXd& nom_ref = k == 0 ? sol_nom.P : prev_P_nom;
    r.neighborhood_bound = r.gamma2 + spectral_norm(nom_ref - P_opt_nom);
    r.neighborhood_satisfied = r.p_error_to_optimum <= r.neighborhood_bound;
    rep.records.push_back(r);

    const bool done = k > 0 && (sol.P - prev_P).norm() < setup.learner.varsigma;
    prev_P = sol.P;
    prev_P_nom = sol_nom.P;
    K = sol.K_next;
    rep.final_gain = sol.K_next;
    rep.nominal_final_gain = sol_nom.K_next;
    if (done) break;
  }
  return rep;
}

std::string bound_report_csv(const std::vector<BoundReport>& reports) {
  std::string out =
      "seed,episodes,iteration,norm_dDxx,norm_dIxx,norm_dIxu0,norm_dTheta,gamma1,theta_pinv_norm,phi_norm,"
      "qbar_vec_norm,gamma2,realized_error,realized_gain_error,p_error_to_optimum,neighborhood_bound,"
      "gamma1_premise_holds,bound_satisfied,neighborhood_satisfied\n";
  for (const auto& rep : reports) {
    for (const auto& r : rep.records) {
      out += std::to_string(rep.seed) + ',' + std::to_string(rep.episodes) + ',' + std::to_string(r.iteration);
      for (double v : {r.norm_dDxx, r.norm_dIxx, r.norm_dIxu0, r.norm_dTheta, r.gamma1, r.theta_pinv_norm, r.phi_norm,
                       r.qbar_vec_norm, r.gamma2, r.realized_error, r.realized_gain_error, r.p_error_to_optimum,
                       r.neighborhood_bound})
        (out += ',') += format_double(v);
      out += std::string(",") + (r.gamma1_premise_holds ? "1" : "0") + ',' + (r.bound_satisfied ? "1" : "0") + ',' +
             (r.neighborhood_satisfied ? "1" : "0") + '\n';
    }
  }
  return out;
}

}  // namespace olqr
