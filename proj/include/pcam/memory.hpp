#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "data.hpp"
#include "exemplars.hpp"
#include "pcn.hpp"
#include "random.hpp"

namespace pcam {

// MSE acceptance bounds used by the experiments.
inline constexpr double denoise_threshold = 0.005;
inline constexpr double completion_threshold = 0.001;

enum class UpdateMode {
	per_sample,  // one parameter update after each item, items in seeded order
	batch        // inference on all items at once, one summed update per epoch
};

struct TrainConfig {
	int steps = 50;        // T, inference steps per training iteration
	double gamma = 0.02;   // integration step
	double alpha = 1e-3;   // learning rate
	int max_epochs = 1000;
	double energy_tol = 1e-5;  // on mean per-sample energy
	std::uint64_t seed = 0;
	UpdateMode mode = UpdateMode::per_sample;

	void validate() const
	{
		if (steps < 1) throw invalid_input("TrainConfig: T must be >= 1");
		if (!(gamma > 0.0)) throw invalid_input("TrainConfig: gamma must be > 0");
		if (!(alpha > 0.0)) throw invalid_input("TrainConfig: alpha must be > 0");
		if (!(energy_tol >= 0.0)) throw invalid_input("TrainConfig: energy_tol must be >= 0");
		if (max_epochs < 1) throw invalid_input("TrainConfig: max_epochs must be >= 1");
	}
};

struct TrainTrace {
	std::vector<double> epoch_energy;  // mean per-sample energy at x_T, per epoch
	bool converged = false;

	double final_energy() const
	{
		return epoch_energy.empty() ? 0.0 : epoch_energy.back();
	}
};

struct RetrievalConfig {
	int steps = 250;       // inference steps per pass
	double gamma = 0.02;
	int iterations = 30;   // applications of F when denoising
	double threshold = denoise_threshold;
	bool clip = true;      // project F outputs to [0,1] between iterations

	void validate() const
	{
		if (steps < 1) throw invalid_input("RetrievalConfig: T must be >= 1");
		if (!(gamma > 0.0)) throw invalid_input("RetrievalConfig: gamma must be > 0");
		if (iterations < 0) throw invalid_input("RetrievalConfig: iterations must be >= 0");
		if (!(threshold > 0.0)) throw invalid_input("RetrievalConfig: threshold must be > 0");
	}
};

struct ItemResult {
	double mse = 0.0;
	bool retrieved = false;
	Index nearest = -1;  // stored item closest to the output
};

struct RetrievalReport {
	std::vector<ItemResult> per_item;
	double rate = 0.0;
	double threshold = 0.0;

	std::size_t retrieved_count() const
	{
		return static_cast<std::size_t>(
		    std::count_if(per_item.begin(), per_item.end(),
		                  [](const ItemResult &r) { return r.retrieved; }));
	}

	double mean_mse() const
	{
		if (per_item.empty()) return 0.0;
		double s = 0.0;
		for (const auto &r : per_item) s += r.mse;
		return s / double(per_item.size());
	}

	/// Items whose output sits closer to a different stored item.
	std::size_t wrong_attractors() const
	{
		std::size_t n = 0;
		for (std::size_t i = 0; i < per_item.size(); ++i)
			if (per_item[i].nearest >= 0 && per_item[i].nearest != Index(i)) ++n;
		return n;
	}
};

/**
 * Stores every item of `data` as an attractor by inference learning: clamp
 * the sensory layer to the item, relax for T steps from the model's own
 * generation, then take one parameter step. Runs until the mean per-sample
 * energy drops below energy_tol or max_epochs is reached.
 *
 * `on_epoch` (optional) is called after every epoch with the epoch index and
 * the mean energy.
 */
inline TrainTrace store(PcnModel &model, const ExemplarSet &data, const TrainConfig &cfg,
                        const std::function<void(int, double)> &on_epoch = {})
{
	cfg.validate();
	if (data.size() == 0) throw invalid_input("cannot store an empty dataset");
	if (data.dim() != model.sensory_width())
		throw dimension_error("dataset dimension " + std::to_string(data.dim()) +
		                      " differs from sensory width " +
		                      std::to_string(model.sensory_width()));
	TrainTrace trace;
	const Index n = data.size();
	std::vector<Index> order(static_cast<std::size_t>(n));
	std::iota(order.begin(), order.end(), Index(0));
	Rng rng = make_rng(cfg.seed, "store-order");

	for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
		double total = 0.0;
		if (cfg.mode == UpdateMode::batch) {
			InferenceState state = generative_state(model, data.items);
			run_inference(model, state, ClampSpec::all(data.items), cfg.gamma, cfg.steps);
			total = energy(state);
			update_parameters(model, state, cfg.alpha);
		} else {
			std::shuffle(order.begin(), order.end(), rng);
			for (Index i : order) {
				const Matrix item = data.items.col(i);
				InferenceState state = generative_state(model, item);
				run_inference(model, state, ClampSpec::all(item), cfg.gamma, cfg.steps);
				total += energy(state);
				update_parameters(model, state, cfg.alpha);
			}
		}
		const double mean = total / double(n);
		trace.epoch_energy.push_back(mean);
		if (on_epoch) on_epoch(epoch, mean);
		if (!std::isfinite(mean)) break;
		if (mean < cfg.energy_tol) {
			trace.converged = true;
			break;
		}
	}
	return trace;
}

/// One application of F: clamp the whole sensory layer, relax, read mu^0.
inline Matrix retrieval_map(const PcnModel &model, const Matrix &queries, const RetrievalConfig &cfg)
{
	InferenceState state = generative_state(model, queries);
	run_inference(model, state, ClampSpec::all(queries), cfg.gamma, cfg.steps);
	return state.predictions[0];
}

/**
 * Iterates F `cfg.iterations` times on every column of `queries`. Weights
 * are never touched. If `trajectory` is given, the output of every iteration
 * is appended to it.
 */
inline Matrix denoise_retrieve(const PcnModel &model, const Matrix &queries,
                               const RetrievalConfig &cfg,
                               std::vector<Matrix> *trajectory = nullptr)
{
	cfg.validate();
	if (queries.rows() != model.sensory_width())
		throw dimension_error("query length differs from sensory width");
	Matrix c = queries;
	for (int k = 0; k < cfg.iterations; ++k) {
		c = retrieval_map(model, c, cfg);
		if (cfg.clip) c = c.cwiseMax(0.0).cwiseMin(1.0);
		if (trajectory) trajectory->push_back(c);
	}
	return c;
}

inline Vector denoise_retrieve(const PcnModel &model, const Vector &query, const RetrievalConfig &cfg)
{
	return denoise_retrieve(model, Matrix(query), cfg).col(0);
}

/**
 * Fills in the unknown entries of each column. Known entries (mask true) are
 * clamped to `partial`; free entries start at the model's prediction and
 * relax with the rest of the network. Returns the sensory value nodes.
 */
inline Matrix complete_retrieve(const PcnModel &model, const Matrix &partial, const Mask &known,
                                const RetrievalConfig &cfg)
{
	cfg.validate();
	if (partial.rows() != model.sensory_width())
		throw dimension_error("partial input length differs from sensory width");
	if (known.rows() != partial.rows() || known.cols() != partial.cols())
		throw dimension_error("mask shape differs from the partial input");
	for (Index j = 0; j < known.cols(); ++j)
		if (!known.col(j).any()) throw invalid_input("mask has no known entry");
	const Mask free = !known;
	InferenceState state = generative_state(model, partial, &free);
	run_inference(model, state, ClampSpec::partial(partial, known), cfg.gamma, cfg.steps);
	return state.values[0];
}

inline Vector complete_retrieve(const PcnModel &model, const Vector &partial,
                                const Eigen::Array<bool, Eigen::Dynamic, 1> &known,
                                const RetrievalConfig &cfg)
{
	return complete_retrieve(model, Matrix(partial), Mask(known), cfg).col(0);
}

/**
 * Recovers the other modality from the entries in `known_span`. `known` is
 * either a full-length vector (entries outside the span are ignored) or
 * exactly the span's entries; one column per query.
 */
inline Matrix hetero_retrieve(const PcnModel &model, const Matrix &known, Span known_span,
                              const ModalityLayout &layout, const RetrievalConfig &cfg)
{
	const Index d = model.sensory_width();
	if (known_span.begin < 0 || known_span.end > d || known_span.size() <= 0)
		throw invalid_input("known span lies outside the sensory layer");
	if (!(known_span == layout.image || known_span == layout.caption ||
	      known_span == Span{0, d}))
		throw invalid_input("known span is not one of the layout's spans");
	Matrix full;
	if (known.rows() == d) {
		full = known;
	} else if (known.rows() == known_span.size()) {
		full = Matrix::Zero(d, known.cols());
		full.middleRows(known_span.begin, known_span.size()) = known;
	} else {
		throw dimension_error("known input matches neither the span nor the full vector");
	}
	const auto column = span_mask(d, known_span);
	const Mask mask = column.replicate(1, full.cols());
	return complete_retrieve(model, full, mask, cfg);
}

inline Vector mse_per_column(const Matrix &a, const Matrix &b)
{
	return (a - b).colwise().squaredNorm().transpose() / double(a.rows());
}

/// Per-item MSE over all entries; retrieved iff MSE < threshold.
inline RetrievalReport evaluate_retrieval(const Matrix &originals, const Matrix &retrieved,
                                          double threshold)
{
	if (originals.cols() == 0 || retrieved.cols() == 0)
		throw invalid_input("nothing to evaluate");
	if (originals.cols() != retrieved.cols() || originals.rows() != retrieved.rows())
		throw invalid_input("originals and retrieved outputs differ in shape");
	RetrievalReport report;
	report.threshold = threshold;
	const Vector mse = mse_per_column(originals, retrieved);
	for (Index i = 0; i < originals.cols(); ++i) {
		Index nearest = 0;
		(originals.colwise() - retrieved.col(i)).colwise().squaredNorm().minCoeff(&nearest);
		report.per_item.push_back({mse(i), mse(i) < threshold, nearest});
	}
	report.rate = double(report.retrieved_count()) / double(report.per_item.size());
	return report;
}

inline RetrievalReport evaluate_retrieval(const ExemplarSet &originals, const Matrix &retrieved,
                                          double threshold)
{
	return evaluate_retrieval(originals.items, retrieved, threshold);
}

}  // namespace pcam
