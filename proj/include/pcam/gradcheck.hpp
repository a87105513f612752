#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "pcn.hpp"
#include "random.hpp"

namespace pcam {

struct GradcheckReport {
	int trials = 0;
	double inference_error = 0.0;  // value-node updates vs -gamma dE/dx
	double weight_error = 0.0;     // weight updates vs -alpha dE/dtheta
	double memory_error = 0.0;     // memory updates vs -alpha dE/db
	double tolerance = 1e-4;

	double max_error() const { return std::max({inference_error, weight_error, memory_error}); }
	bool passed() const { return max_error() < tolerance; }
};

namespace detail {

// ||a - b|| / max(||a||, ||b||), or |a - b| when both are below 1e-12.
inline double relative_error(const Vector &a, const Vector &b)
{
	const double scale = std::max(a.norm(), b.norm());
	const double diff = (a - b).norm();
	return scale < 1e-12 ? diff : diff / scale;
}

inline double energy_at(const PcnModel &model, InferenceState state)
{
	refresh(model, state);
	return energy(state);
}

template <typename Poke>
double central_difference(double &slot, double h, Poke &&eval)
{
	const double saved = slot;
	slot = saved + h;
	const double up = eval();
	slot = saved - h;
	const double down = eval();
	slot = saved;
	return (up - down) / (2.0 * h);
}

}  // namespace detail

/**
 * Compares one analytic step of each update rule with a central finite
 * difference of the energy, on a single random model/state.
 */
inline GradcheckReport gradcheck_once(const PcnModel &model, InferenceState state, double h,
                                      double gamma = 0.1, double alpha = 0.1)
{
	refresh(model, state);
	GradcheckReport rep;
	rep.trials = 1;
	const std::size_t top = model.depth();

	// Value nodes: every layer free, single column.
	{
		InferenceState stepped = state;
		inference_step(model, stepped, ClampSpec::none(model.sensory_width(), 1), gamma);
		std::vector<double> analytic, numeric;
		InferenceState probe = state;
		for (std::size_t l = 0; l <= top; ++l) {
			for (Index i = 0; i < probe.values[l].rows(); ++i) {
				analytic.push_back(stepped.values[l](i, 0) - state.values[l](i, 0));
				const double g = detail::central_difference(
				    probe.values[l](i, 0), h, [&] { return detail::energy_at(model, probe); });
				numeric.push_back(-gamma * g);
			}
		}
		rep.inference_error = detail::relative_error(
		    Eigen::Map<Vector>(analytic.data(), Index(analytic.size())),
		    Eigen::Map<Vector>(numeric.data(), Index(numeric.size())));
	}

	PcnModel updated = model;
	update_parameters(updated, state, alpha);
	PcnModel probe = model;
	auto eval = [&] { return detail::energy_at(probe, state); };

	std::vector<double> analytic, numeric;
	for (std::size_t l = 1; l <= top; ++l) {
		Matrix &w = probe.theta(l);
		for (Index i = 0; i < w.rows(); ++i)
			for (Index j = 0; j < w.cols(); ++j) {
				analytic.push_back(updated.theta(l)(i, j) - model.theta(l)(i, j));
				numeric.push_back(-alpha * detail::central_difference(w(i, j), h, eval));
			}
	}
	rep.weight_error = detail::relative_error(Eigen::Map<Vector>(analytic.data(), Index(analytic.size())),
	                                          Eigen::Map<Vector>(numeric.data(), Index(numeric.size())));

	Vector mem_analytic = updated.memory - model.memory;
	Vector mem_numeric(model.memory.size());
	for (Index i = 0; i < mem_numeric.size(); ++i)
		mem_numeric(i) = -alpha * detail::central_difference(probe.memory(i), h, eval);
	rep.memory_error = detail::relative_error(mem_analytic, mem_numeric);
	return rep;
}

/**
 * Runs `trials` random checks. Value nodes are drawn from N(0,1), the model
 * from init_model. Activation must be smooth.
 */
inline GradcheckReport gradcheck(const std::vector<Index> &widths, Activation activation, int trials,
                                 double h, std::uint64_t seed, double tolerance = 1e-4)
{
	if (activation == Activation::relu)
		throw unsupported_error("gradcheck needs a smooth activation; relu has a kink at 0");
	if (trials < 1) throw invalid_input("gradcheck needs at least one trial");
	if (!(h > 0.0)) throw invalid_input("finite-difference step must be positive");
	check_widths(widths);
	GradcheckReport total;
	total.tolerance = tolerance;
	Rng rng = make_rng(seed, "gradcheck-state");
	std::normal_distribution<double> normal(0.0, 1.0);
	for (int t = 0; t < trials; ++t) {
		const PcnModel model = init_model(widths, activation, seed + 7919ULL * std::uint64_t(t + 1));
		InferenceState state;
		for (Index w : widths) {
			Matrix x(w, 1);
			for (Index i = 0; i < w; ++i) x(i, 0) = normal(rng);
			state.values.push_back(std::move(x));
		}
		const GradcheckReport r = gradcheck_once(model, state, h);
		total.inference_error = std::max(total.inference_error, r.inference_error);
		total.weight_error = std::max(total.weight_error, r.weight_error);
		total.memory_error = std::max(total.memory_error, r.memory_error);
		++total.trials;
	}
	return total;
}

}  // namespace pcam
