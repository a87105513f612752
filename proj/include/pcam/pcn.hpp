#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "random.hpp"

namespace pcam {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

enum class Activation : std::uint32_t { identity = 0, relu = 1, tanh = 2 };

inline double activate(Activation kind, double x)
{
	switch (kind) {
	case Activation::identity: return x;
	case Activation::relu: return x > 0.0 ? x : 0.0;
	case Activation::tanh: return std::tanh(x);
	}
	return x;
}

// relu'(0) is taken as 0.
inline double activate_derivative(Activation kind, double x)
{
	switch (kind) {
	case Activation::identity: return 1.0;
	case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
	case Activation::tanh: {
		const double t = std::tanh(x);
		return 1.0 - t * t;
	}
	}
	return 1.0;
}

template <typename Derived>
Matrix activate(Activation kind, const Eigen::MatrixBase<Derived> &x)
{
	switch (kind) {
	case Activation::identity: return x;
	case Activation::relu: return x.cwiseMax(0.0);
	case Activation::tanh: return x.array().tanh().matrix();
	}
	return x;
}

template <typename Derived>
Matrix activate_derivative(Activation kind, const Eigen::MatrixBase<Derived> &x)
{
	switch (kind) {
	case Activation::identity: return Matrix::Ones(x.rows(), x.cols());
	case Activation::relu:
		return (x.array() > 0.0).template cast<double>().matrix();
	case Activation::tanh:
		return (1.0 - x.array().tanh().square()).matrix();
	}
	return Matrix::Ones(x.rows(), x.cols());
}

inline std::string_view to_string(Activation kind)
{
	switch (kind) {
	case Activation::identity: return "identity";
	case Activation::relu: return "relu";
	case Activation::tanh: return "tanh";
	}
	return "?";
}

inline Activation parse_activation(std::string_view name)
{
	if (name == "identity" || name == "linear") return Activation::identity;
	if (name == "relu") return Activation::relu;
	if (name == "tanh") return Activation::tanh;
	throw invalid_input("unknown activation '" + std::string(name) + "'");
}

/**
 * Generative predictive coding network.
 *
 * Layer 0 is the sensory layer, layer L = depth() the memory layer. The
 * prediction of layer l < L is theta(l+1) * f(x^{l+1}); the prediction of the
 * memory layer is the memory vector itself.
 */
struct PcnModel {
	std::vector<Index> widths;    // [d, n^1, ..., n^L]
	std::vector<Matrix> weights;  // weights[l-1] = theta^l, n^{l-1} x n^l
	Vector memory;                // b, length n^L
	Activation activation = Activation::relu;

	std::size_t depth() const { return weights.size(); }
	Index sensory_width() const { return widths.front(); }

	Matrix &theta(std::size_t l) { return weights[l - 1]; }
	const Matrix &theta(std::size_t l) const { return weights[l - 1]; }

	void validate() const
	{
		if (widths.size() < 2 || weights.size() + 1 != widths.size())
			throw invalid_architecture("model needs at least one weight layer");
		for (std::size_t l = 1; l < widths.size(); ++l) {
			const Matrix &w = weights[l - 1];
			if (w.rows() != widths[l - 1] || w.cols() != widths[l])
				throw invalid_architecture("weight shape mismatch at layer " +
				                           std::to_string(l));
			if (!w.allFinite())
				throw invalid_input("non-finite weight at layer " + std::to_string(l));
		}
		if (memory.size() != widths.back())
			throw invalid_architecture("memory vector length mismatch");
		if (!memory.allFinite()) throw invalid_input("non-finite memory vector");
	}
};

inline void check_widths(const std::vector<Index> &widths, std::size_t min_len = 2)
{
	if (widths.size() < min_len)
		throw invalid_architecture("need at least " + std::to_string(min_len) +
		                           " layer widths");
	for (Index w : widths)
		if (w <= 0) throw invalid_architecture("layer widths must be positive");
}

// Every weight and the memory vector are drawn from U(-1/sqrt(fan_in),
// 1/sqrt(fan_in)), fan_in being the width of the upper layer. Draw order is
// theta^1 .. theta^L row by row, then b.
inline PcnModel init_model(const std::vector<Index> &widths, Activation activation,
                           std::uint64_t seed)
{
	check_widths(widths);
	PcnModel model;
	model.widths = widths;
	model.activation = activation;
	Rng rng = make_rng(seed, "pcn-init");
	for (std::size_t l = 1; l < widths.size(); ++l) {
		const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
		std::uniform_real_distribution<double> u(-bound, bound);
		Matrix w(widths[l - 1], widths[l]);
		for (Index i = 0; i < w.rows(); ++i)
			for (Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
		model.weights.push_back(std::move(w));
	}
	const double bound = 1.0 / std::sqrt(static_cast<double>(widths.back()));
	std::uniform_real_distribution<double> u(-bound, bound);
	model.memory.resize(widths.back());
	for (Index i = 0; i < model.memory.size(); ++i) model.memory(i) = u(rng);
	return model;
}

/// Value, prediction and error nodes of every layer; one column per sample.
struct InferenceState {
	std::vector<Matrix> values;
	std::vector<Matrix> predictions;
	std::vector<Matrix> errors;

	Index batch() const { return values.empty() ? 0 : values.front().cols(); }
};

/// Which sensory entries are held fixed during inference, and at what.
struct ClampSpec {
	Mask clamped;  // d x B
	Matrix values; // d x B, read only where clamped

	static ClampSpec all(const Matrix &values)
	{
		return {Mask::Constant(values.rows(), values.cols(), true), values};
	}
	static ClampSpec none(Index d, Index batch)
	{
		return {Mask::Constant(d, batch, false), Matrix::Zero(d, batch)};
	}
	static ClampSpec partial(const Matrix &values, const Mask &known)
	{
		if (known.rows() != values.rows() || known.cols() != values.cols())
			throw dimension_error("clamp mask shape differs from clamp values");
		return {known, values};
	}
};

namespace detail {

inline void check_state_shape(const PcnModel &model, const InferenceState &state)
{
	const std::size_t layers = model.widths.size();
	if (state.values.size() != layers)
		throw dimension_error("state has " + std::to_string(state.values.size()) +
		                      " layers, model has " + std::to_string(layers));
	const Index batch = state.values.front().cols();
	for (std::size_t l = 0; l < layers; ++l)
		if (state.values[l].rows() != model.widths[l] || state.values[l].cols() != batch)
			throw dimension_error("value nodes of layer " + std::to_string(l) +
			                      " have the wrong shape");
}

inline void check_refreshed_shape(const PcnModel &model, const InferenceState &state)
{
	check_state_shape(model, state);
	if (state.errors.size() != state.values.size() ||
	    state.predictions.size() != state.values.size())
		throw dimension_error("state has not been refreshed");
	for (std::size_t l = 0; l < state.values.size(); ++l)
		if (state.errors[l].rows() != state.values[l].rows() ||
		    state.errors[l].cols() != state.values[l].cols())
			throw dimension_error("state has not been refreshed");
}

}  // namespace detail

/// Recomputes predictions and errors from the current value nodes.
inline void refresh(const PcnModel &model, InferenceState &state)
{
	detail::check_state_shape(model, state);
	const std::size_t top = model.depth();
	const Index batch = state.batch();
	state.predictions.resize(top + 1);
	state.errors.resize(top + 1);
	state.predictions[top] = model.memory.replicate(1, batch);
	for (std::size_t l = 0; l < top; ++l)
		state.predictions[l].noalias() =
		    model.theta(l + 1) * activate(model.activation, state.values[l + 1]);
	for (std::size_t l = 0; l <= top; ++l)
		state.errors[l] = state.values[l] - state.predictions[l];
}

/**
 * Starts every column at the model's own generation: x^L = b, then
 * x^l = mu^l downwards. The sensory layer is set to `sensory`; entries of it
 * flagged in `from_prediction` are instead set to mu^0.
 */
inline InferenceState generative_state(const PcnModel &model, const Matrix &sensory,
                                       const Mask *from_prediction = nullptr)
{
	if (sensory.rows() != model.sensory_width())
		throw dimension_error("sensory input has " + std::to_string(sensory.rows()) +
		                      " entries, model expects " +
		                      std::to_string(model.sensory_width()));
	const std::size_t top = model.depth();
	const Index batch = sensory.cols();
	InferenceState state;
	state.values.resize(top + 1);
	state.values[top] = model.memory.replicate(1, batch);
	for (std::size_t l = top; l-- > 1;)
		state.values[l].noalias() =
		    model.theta(l + 1) * activate(model.activation, state.values[l + 1]);
	if (from_prediction) {
		Matrix mu0 = model.theta(1) * activate(model.activation, state.values[1]);
		state.values[0] = from_prediction->select(mu0, sensory);
	} else {
		state.values[0] = sensory;
	}
	refresh(model, state);
	return state;
}

/// The sensory pattern the model generates from its memory vector alone.
inline Vector generate(const PcnModel &model)
{
	Matrix x = model.memory;
	for (std::size_t l = model.depth(); l >= 1; --l)
		x = model.theta(l) * activate(model.activation, x);
	return x.col(0);
}

/// Per-sample energy 0.5 * sum of squared errors over layers 0..L.
inline Vector sample_energies(const InferenceState &state)
{
	Vector e = Vector::Zero(state.batch());
	for (const Matrix &err : state.errors) e += err.colwise().squaredNorm().transpose();
	return 0.5 * e;
}

/// Total energy of the state, summed over the batch.
inline double energy(const InferenceState &state)
{
	double e = 0.0;
	for (const Matrix &err : state.errors) e += err.squaredNorm();
	return 0.5 * e;
}

/**
 * One Euler step of the value-node dynamics, followed by a refresh.
 *
 * Hidden and memory layers descend the energy gradient. Free sensory entries
 * move by -gamma * eps^0; clamped ones are rewritten to their clamp value.
 */
inline void inference_step(const PcnModel &model, InferenceState &state,
                           const ClampSpec &clamp, double gamma)
{
	detail::check_refreshed_shape(model, state);
	if (!(gamma > 0.0)) throw invalid_input("integration step must be positive");
	const Matrix &x0 = state.values[0];
	if (clamp.clamped.rows() != x0.rows() || clamp.clamped.cols() != x0.cols() ||
	    clamp.values.rows() != x0.rows() || clamp.values.cols() != x0.cols())
		throw dimension_error("clamp spec does not match the sensory layer");

	const std::size_t top = model.depth();
	for (std::size_t l = 1; l <= top; ++l) {
		Matrix feedback = model.theta(l).transpose() * state.errors[l - 1];
		feedback.array() *= activate_derivative(model.activation, state.values[l]).array();
		state.values[l] += gamma * (feedback - state.errors[l]);
	}
	state.values[0] =
	    clamp.clamped.select(clamp.values, state.values[0] - gamma * state.errors[0]);
	refresh(model, state);
}

inline void run_inference(const PcnModel &model, InferenceState &state,
                          const ClampSpec &clamp, double gamma, int steps)
{
	if (steps < 1) throw invalid_input("inference needs at least one step");
	for (int t = 0; t < steps; ++t) inference_step(model, state, clamp, gamma);
}

/**
 * Single descent step on the weights and memory vector at a (converged)
 * state. Contributions of all columns are summed.
 */
inline void update_parameters(PcnModel &model, const InferenceState &state, double alpha)
{
	detail::check_refreshed_shape(model, state);
	if (!(alpha >= 0.0)) throw invalid_input("learning rate must be non-negative");
	const std::size_t top = model.depth();
	for (std::size_t l = 0; l < top; ++l)
		model.theta(l + 1).noalias() +=
		    alpha * state.errors[l] *
		    activate(model.activation, state.values[l + 1]).transpose();
	model.memory += alpha * state.errors[top].rowwise().sum();
}

}  // namespace pcam
