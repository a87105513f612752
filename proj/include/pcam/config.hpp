#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "baselines.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "memory.hpp"

namespace pcam {

enum class Task { denoise, complete, hetero, mhn_compare, ae_compare, gradcheck };

inline std::string_view to_string(Task t)
{
	switch (t) {
	case Task::denoise: return "denoise";
	case Task::complete: return "complete";
	case Task::hetero: return "hetero";
	case Task::mhn_compare: return "mhn_compare";
	case Task::ae_compare: return "ae_compare";
	case Task::gradcheck: return "gradcheck";
	}
	return "?";
}

enum class CorruptionKind { noise, mask, modality };

inline std::string_view to_string(CorruptionKind k)
{
	switch (k) {
	case CorruptionKind::noise: return "noise";
	case CorruptionKind::mask: return "mask";
	case CorruptionKind::modality: return "modality";
	}
	return "?";
}

struct ModelSpec {
	int depth = 2;
	Index width = 256;
	std::vector<Index> hidden;  // explicit hidden widths; overrides depth/width
	Activation activation = Activation::relu;

	std::vector<Index> hidden_widths() const
	{
		return hidden.empty() ? std::vector<Index>(std::size_t(depth), width) : hidden;
	}
	std::vector<Index> widths(Index d) const
	{
		std::vector<Index> w{d};
		for (Index h : hidden_widths()) w.push_back(h);
		return w;
	}
};

struct DataSpec {
	std::string corpus = "procedural";  // or a file listing image paths
	Index count = 50;
	TensorShape shape{3, 32, 32};
	std::string captions;  // caption corpus file, hetero task
	std::string vocab;     // optional vocabulary file
	Index caption_length = 25;
};

struct CorruptionSpec {
	CorruptionKind kind = CorruptionKind::noise;
	double sigma = 0.2;
	NoiseScale scale = NoiseScale::variance;
	MaskKind mask = MaskKind::random_pixels;
	double fraction = 0.5;
	std::string known = "caption";  // modality cue: caption or image
};

struct ExperimentConfig {
	Task task = Task::denoise;
	ModelSpec model;
	TrainConfig train;
	RetrievalConfig retrieval;
	std::optional<double> threshold;
	DataSpec data;
	CorruptionSpec corruption;

	double mhn_beta = 1000.0;
	int mhn_copies = 1;
	int mhn_iterations = 10;

	std::vector<Index> ae_hidden;  // empty: [width, width]
	bool ae_match_params = false;
	int ae_epochs = 2000;
	double ae_lr = 0.05;
	int ae_iterations = 30;

	int gradcheck_trials = 20;
	double gradcheck_h = 1e-5;
	std::vector<Index> gradcheck_widths{8, 6, 4};
	Activation gradcheck_activation = Activation::tanh;

	std::vector<std::pair<std::string, std::vector<std::string>>> sweeps;
	bool select_best = false;
	std::uint64_t seed = 0;
	std::string out_dir = "out";
	std::string checkpoint;  // load this PCN instead of training
	int grid_items = 0;
	std::vector<int> grid_iterations;

	/// denoise, complete and hetero fix their corruption; baselines read corruption.kind.
	CorruptionKind effective_corruption() const
	{
		switch (task) {
		case Task::denoise: return CorruptionKind::noise;
		case Task::complete: return CorruptionKind::mask;
		case Task::hetero: return CorruptionKind::modality;
		default: return corruption.kind;
		}
	}

	double effective_threshold() const
	{
		if (threshold) return *threshold;
		return effective_corruption() == CorruptionKind::noise ? denoise_threshold
		                                                        : completion_threshold;
	}
};

namespace detail {

inline std::string trim(std::string_view s)
{
	const auto b = s.find_first_not_of(" \t\r\n");
	if (b == std::string_view::npos) return {};
	const auto e = s.find_last_not_of(" \t\r\n");
	return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s)
{
	std::vector<std::string> out;
	std::size_t start = 0;
	while (true) {
		const auto comma = s.find(',', start);
		const auto item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
		if (!item.empty()) out.push_back(item);
		if (comma == std::string_view::npos) break;
		start = comma + 1;
	}
	return out;
}

inline double parse_double(const std::string &key, const std::string &v)
{
	try {
		std::size_t used = 0;
		const double d = std::stod(v, &used);
		if (used != v.size()) throw std::invalid_argument(v);
		return d;
	} catch (const std::exception &) {
		throw config_error("expected a number, got '" + v + "'", key);
	}
}

inline long long parse_int(const std::string &key, const std::string &v)
{
	long long out = 0;
	const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
	if (res.ec != std::errc() || res.ptr != v.data() + v.size())
		throw config_error("expected an integer, got '" + v + "'", key);
	return out;
}

inline bool parse_bool(const std::string &key, const std::string &v)
{
	if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
	if (v == "false" || v == "0" || v == "no" || v == "off") return false;
	throw config_error("expected true/false, got '" + v + "'", key);
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string &key, const std::string &v, F &&one)
{
	std::vector<T> out;
	for (const auto &item : split_list(v)) out.push_back(static_cast<T>(one(key, item)));
	return out;
}

template <typename T>
std::string join(const std::vector<T> &xs)
{
	std::ostringstream o;
	for (std::size_t i = 0; i < xs.size(); ++i) o << (i ? "," : "") << xs[i];
	return o.str();
}

inline std::string fmt(double v)
{
	std::ostringstream o;
	o.precision(10);
	o << v;
	return o.str();
}

struct Field {
	std::string key;
	bool scalar;  // eligible for sweeps
	std::function<void(ExperimentConfig &, const std::string &)> set;
	std::function<std::string(const ExperimentConfig &)> get;
};

template <typename Enum>
Enum parse_enum(const std::string &key, const std::string &v, Enum (*parse)(std::string_view))
{
	try {
		return parse(v);
	} catch (const invalid_input &e) {
		throw config_error(e.what(), key);
	}
}

inline Task parse_task(std::string_view v)
{
	for (Task t : {Task::denoise, Task::complete, Task::hetero, Task::mhn_compare, Task::ae_compare,
	               Task::gradcheck})
		if (to_string(t) == v) return t;
	throw invalid_input("unknown task '" + std::string(v) + "'");
}

inline CorruptionKind parse_corruption_kind(std::string_view v)
{
	if (v == "noise") return CorruptionKind::noise;
	if (v == "mask") return CorruptionKind::mask;
	if (v == "modality") return CorruptionKind::modality;
	throw invalid_input("unknown corruption kind '" + std::string(v) + "'");
}

inline NoiseScale parse_noise_scale(std::string_view v)
{
	if (v == "variance") return NoiseScale::variance;
	if (v == "stddev" || v == "std") return NoiseScale::stddev;
	throw invalid_input("unknown noise scale '" + std::string(v) + "'");
}

inline UpdateMode parse_update_mode(std::string_view v)
{
	if (v == "per_sample") return UpdateMode::per_sample;
	if (v == "batch") return UpdateMode::batch;
	throw invalid_input("unknown update mode '" + std::string(v) + "'");
}

#define PCAM_SCALAR(KEY, EXPR, PARSE, SHOW)                                                     \
	Field{KEY, true, [](ExperimentConfig &c, const std::string &v) { EXPR = PARSE; },          \
	      [](const ExperimentConfig &c) { return SHOW; }}
#define PCAM_LIST(KEY, EXPR, PARSE, SHOW)                                                       \
	Field{KEY, false, [](ExperimentConfig &c, const std::string &v) { EXPR = PARSE; },         \
	      [](const ExperimentConfig &c) { return SHOW; }}

inline const std::vector<Field> &fields()
{
	static const std::vector<Field> table{
	    PCAM_SCALAR("task", c.task, parse_enum<Task>("task", v, parse_task),
	                std::string(to_string(c.task))),
	    PCAM_SCALAR("seed", c.seed, std::uint64_t(parse_int("seed", v)), std::to_string(c.seed)),
	    PCAM_SCALAR("out", c.out_dir, v, c.out_dir),
	    PCAM_SCALAR("checkpoint", c.checkpoint, v, c.checkpoint),
	    PCAM_SCALAR("select_best", c.select_best, parse_bool("select_best", v),
	                c.select_best ? "true" : "false"),

	    PCAM_SCALAR("model.depth", c.model.depth, int(parse_int("model.depth", v)),
	                std::to_string(c.model.depth)),
	    PCAM_SCALAR("model.width", c.model.width, Index(parse_int("model.width", v)),
	                std::to_string(c.model.width)),
	    PCAM_LIST("model.hidden", c.model.hidden,
	              parse_list<Index>("model.hidden", v, parse_int), join(c.model.hidden)),
	    PCAM_SCALAR("model.activation", c.model.activation,
	                parse_enum<Activation>("model.activation", v, parse_activation),
	                std::string(to_string(c.model.activation))),

	    PCAM_SCALAR("train.T", c.train.steps, int(parse_int("train.T", v)), std::to_string(c.train.steps)),
	    PCAM_SCALAR("train.gamma", c.train.gamma, parse_double("train.gamma", v), fmt(c.train.gamma)),
	    PCAM_SCALAR("train.alpha", c.train.alpha, parse_double("train.alpha", v), fmt(c.train.alpha)),
	    PCAM_SCALAR("train.max_epochs", c.train.max_epochs, int(parse_int("train.max_epochs", v)),
	                std::to_string(c.train.max_epochs)),
	    PCAM_SCALAR("train.energy_tol", c.train.energy_tol, parse_double("train.energy_tol", v),
	                fmt(c.train.energy_tol)),
	    PCAM_SCALAR("train.mode", c.train.mode,
	                parse_enum<UpdateMode>("train.mode", v, parse_update_mode),
	                c.train.mode == UpdateMode::batch ? "batch" : "per_sample"),

	    PCAM_SCALAR("retrieval.T", c.retrieval.steps, int(parse_int("retrieval.T", v)),
	                std::to_string(c.retrieval.steps)),
	    PCAM_SCALAR("retrieval.gamma", c.retrieval.gamma, parse_double("retrieval.gamma", v),
	                fmt(c.retrieval.gamma)),
	    PCAM_SCALAR("retrieval.iterations", c.retrieval.iterations,
	                int(parse_int("retrieval.iterations", v)), std::to_string(c.retrieval.iterations)),
	    PCAM_SCALAR("retrieval.threshold", c.threshold, parse_double("retrieval.threshold", v),
	                fmt(c.effective_threshold())),
	    PCAM_SCALAR("retrieval.clip", c.retrieval.clip, parse_bool("retrieval.clip", v),
	                c.retrieval.clip ? "true" : "false"),

	    PCAM_SCALAR("data.corpus", c.data.corpus, v, c.data.corpus),
	    PCAM_SCALAR("data.N", c.data.count, Index(parse_int("data.N", v)), std::to_string(c.data.count)),
	    PCAM_SCALAR("data.channels", c.data.shape.channels, Index(parse_int("data.channels", v)),
	                std::to_string(c.data.shape.channels)),
	    PCAM_SCALAR("data.height", c.data.shape.height, Index(parse_int("data.height", v)),
	                std::to_string(c.data.shape.height)),
	    PCAM_SCALAR("data.width", c.data.shape.width, Index(parse_int("data.width", v)),
	                std::to_string(c.data.shape.width)),
	    PCAM_SCALAR("data.captions", c.data.captions, v, c.data.captions),
	    PCAM_SCALAR("data.vocab", c.data.vocab, v, c.data.vocab),
	    PCAM_SCALAR("data.caption_length", c.data.caption_length,
	                Index(parse_int("data.caption_length", v)), std::to_string(c.data.caption_length)),

	    PCAM_SCALAR("corruption.kind", c.corruption.kind,
	                parse_enum<CorruptionKind>("corruption.kind", v, parse_corruption_kind),
	                std::string(to_string(c.corruption.kind))),
	    PCAM_SCALAR("corruption.sigma", c.corruption.sigma, parse_double("corruption.sigma", v),
	                fmt(c.corruption.sigma)),
	    PCAM_SCALAR("corruption.noise_scale", c.corruption.scale,
	                parse_enum<NoiseScale>("corruption.noise_scale", v, parse_noise_scale),
	                c.corruption.scale == NoiseScale::variance ? "variance" : "stddev"),
	    PCAM_SCALAR("corruption.mask", c.corruption.mask,
	                parse_enum<MaskKind>("corruption.mask", v, parse_mask_kind),
	                std::string(to_string(c.corruption.mask))),
	    PCAM_SCALAR("corruption.fraction", c.corruption.fraction,
	                parse_double("corruption.fraction", v), fmt(c.corruption.fraction)),
	    PCAM_SCALAR("corruption.known", c.corruption.known, v, c.corruption.known),

	    PCAM_SCALAR("mhn.beta", c.mhn_beta, parse_double("mhn.beta", v), fmt(c.mhn_beta)),
	    PCAM_SCALAR("mhn.copies", c.mhn_copies, int(parse_int("mhn.copies", v)),
	                std::to_string(c.mhn_copies)),
	    PCAM_SCALAR("mhn.iterations", c.mhn_iterations, int(parse_int("mhn.iterations", v)),
	                std::to_string(c.mhn_iterations)),

	    PCAM_LIST("ae.hidden", c.ae_hidden, parse_list<Index>("ae.hidden", v, parse_int),
	              join(c.ae_hidden)),
	    PCAM_SCALAR("ae.match_params", c.ae_match_params, parse_bool("ae.match_params", v),
	                c.ae_match_params ? "true" : "false"),
	    PCAM_SCALAR("ae.epochs", c.ae_epochs, int(parse_int("ae.epochs", v)), std::to_string(c.ae_epochs)),
	    PCAM_SCALAR("ae.lr", c.ae_lr, parse_double("ae.lr", v), fmt(c.ae_lr)),
	    PCAM_SCALAR("ae.iterations", c.ae_iterations, int(parse_int("ae.iterations", v)),
	                std::to_string(c.ae_iterations)),

	    PCAM_SCALAR("gradcheck.trials", c.gradcheck_trials, int(parse_int("gradcheck.trials", v)),
	                std::to_string(c.gradcheck_trials)),
	    PCAM_SCALAR("gradcheck.h", c.gradcheck_h, parse_double("gradcheck.h", v), fmt(c.gradcheck_h)),
	    PCAM_LIST("gradcheck.widths", c.gradcheck_widths,
	              parse_list<Index>("gradcheck.widths", v, parse_int), join(c.gradcheck_widths)),
	    PCAM_SCALAR("gradcheck.activation", c.gradcheck_activation,
	                parse_enum<Activation>("gradcheck.activation", v, parse_activation),
	                std::string(to_string(c.gradcheck_activation))),

	    PCAM_SCALAR("grid.items", c.grid_items, int(parse_int("grid.items", v)),
	                std::to_string(c.grid_items)),
	    PCAM_LIST("grid.iterations", c.grid_iterations,
	              parse_list<int>("grid.iterations", v, parse_int), join(c.grid_iterations)),
	};
	return table;
}

#undef PCAM_SCALAR
#undef PCAM_LIST

inline const Field *find_field(const std::string &key)
{
	for (const auto &f : fields())
		if (f.key == key) return &f;
	return nullptr;
}

}  // namespace detail

/// Sets one field from its textual value; unknown keys are config errors.
inline void set_config_value(ExperimentConfig &cfg, const std::string &key, const std::string &value)
{
	if (key.rfind("sweep.", 0) == 0) {
		const std::string target = key.substr(6);
		const auto *f = detail::find_field(target);
		if (!f) throw config_error("sweep over unknown field", target);
		if (!f->scalar) throw config_error("only scalar fields can be swept", target);
		auto values = detail::split_list(value);
		if (values.empty()) throw config_error("empty sweep list", key);
		for (auto &[k, vs] : cfg.sweeps)
			if (k == target) {
				vs = std::move(values);
				return;
			}
		cfg.sweeps.emplace_back(target, std::move(values));
		return;
	}
	const auto *f = detail::find_field(key);
	if (!f) throw config_error("unknown key", key);
	f->set(cfg, detail::trim(value));
}

/// Field-level checks; throws config_error naming the offending field.
inline void validate_config(const ExperimentConfig &c)
{
	auto require = [](bool ok, const char *field, const char *what) {
		if (!ok) throw config_error(what, field);
	};
	require(c.data.count >= 1, "data.N", "must be >= 1");
	require(c.model.depth >= 1, "model.depth", "must be >= 1");
	require(c.model.width >= 1, "model.width", "must be >= 1");
	for (Index h : c.model.hidden) require(h >= 1, "model.hidden", "widths must be positive");
	require(c.train.steps >= 1, "train.T", "must be >= 1");
	require(c.train.gamma > 0, "train.gamma", "must be > 0");
	require(c.train.alpha > 0, "train.alpha", "must be > 0");
	require(c.train.max_epochs >= 1, "train.max_epochs", "must be >= 1");
	require(c.train.energy_tol >= 0, "train.energy_tol", "must be >= 0");
	require(c.retrieval.steps >= 1, "retrieval.T", "must be >= 1");
	require(c.retrieval.gamma > 0, "retrieval.gamma", "must be > 0");
	require(c.retrieval.iterations >= 0, "retrieval.iterations", "must be >= 0");
	require(c.effective_threshold() > 0, "retrieval.threshold", "must be > 0");
	require(c.data.shape.channels >= 1 && c.data.shape.height >= 1 && c.data.shape.width >= 1,
	        "data.channels", "image shape must be positive");
	require(c.data.caption_length >= 1, "data.caption_length", "must be >= 1");
	require(c.corruption.sigma >= 0, "corruption.sigma", "must be >= 0");
	require(c.corruption.fraction > 0 && c.corruption.fraction <= 1, "corruption.fraction",
	        "must lie in (0, 1]");
	require(c.corruption.known == "caption" || c.corruption.known == "image", "corruption.known",
	        "must be caption or image");
	require(c.effective_corruption() != CorruptionKind::modality || !c.data.captions.empty(),
	        "data.captions", "the modality corruption needs a caption corpus");
	require(c.mhn_beta > 0, "mhn.beta", "must be > 0");
	require(c.mhn_copies >= 1, "mhn.copies", "must be >= 1");
	require(c.mhn_iterations >= 1, "mhn.iterations", "must be >= 1");
	require(c.ae_epochs >= 0, "ae.epochs", "must be >= 0");
	require(c.ae_lr >= 0, "ae.lr", "must be >= 0");
	require(c.ae_iterations >= 1, "ae.iterations", "must be >= 1");
	require(c.gradcheck_trials >= 1, "gradcheck.trials", "must be >= 1");
	require(c.gradcheck_h > 0, "gradcheck.h", "must be > 0");
	require(c.gradcheck_widths.size() >= 2, "gradcheck.widths", "needs at least two widths");
	require(c.grid_items >= 0, "grid.items", "must be >= 0");
}

/// Parses flat `key = value` text; '#' starts a comment.
inline ExperimentConfig parse_config(const std::string &text, ExperimentConfig cfg = {})
{
	std::istringstream in(text);
	std::string line;
	int lineno = 0;
	while (std::getline(in, line)) {
		++lineno;
		if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
		const std::string t = detail::trim(line);
		if (t.empty()) continue;
		const auto eq = t.find('=');
		if (eq == std::string::npos)
			throw config_error("line " + std::to_string(lineno) + " is not key = value", t);
		set_config_value(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
	}
	validate_config(cfg);
	return cfg;
}

inline ExperimentConfig load_config(const std::string &path, ExperimentConfig cfg = {})
{
	std::ifstream in(path);
	if (!in) throw io_error("cannot open config", path);
	std::ostringstream text;
	text << in.rdbuf();
	return parse_config(text.str(), std::move(cfg));
}

/// Every field as `key=value`, in table order.
inline std::vector<std::pair<std::string, std::string>> resolved_fields(const ExperimentConfig &c)
{
	std::vector<std::pair<std::string, std::string>> out;
	for (const auto &f : detail::fields()) out.emplace_back(f.key, f.get(c));
	return out;
}

inline std::string resolved_string(const ExperimentConfig &c)
{
	std::string s;
	for (const auto &[k, v] : resolved_fields(c)) s += (s.empty() ? "" : ";") + k + "=" + v;
	return s;
}

/**
 * Cartesian product of the sweep lists, first sweep key outermost. The MHN
 * task sweeps the default beta and copies grids unless those keys are
 * swept explicitly.
 */
inline std::vector<ExperimentConfig> expand_sweeps(const ExperimentConfig &base)
{
	auto sweeps = base.sweeps;
	if (base.task == Task::mhn_compare) {
		auto swept = [&](const std::string &k) {
			return std::any_of(sweeps.begin(), sweeps.end(), [&](const auto &s) { return s.first == k; });
		};
		if (!swept("mhn.beta")) {
			std::vector<std::string> vs;
			for (double b : default_beta_grid()) vs.push_back(detail::fmt(b));
			sweeps.emplace_back("mhn.beta", vs);
		}
		if (!swept("mhn.copies")) {
			std::vector<std::string> vs;
			for (int k : default_copies_grid()) vs.push_back(std::to_string(k));
			sweeps.emplace_back("mhn.copies", vs);
		}
	}
	std::vector<ExperimentConfig> points{base};
	for (const auto &[key, values] : sweeps) {
		std::vector<ExperimentConfig> next;
		for (const auto &p : points)
			for (const auto &v : values) {
				ExperimentConfig q = p;
				set_config_value(q, key, v);
				next.push_back(std::move(q));
			}
		points = std::move(next);
	}
	for (auto &p : points) {
		p.sweeps.clear();
		validate_config(p);
	}
	return points;
}

}  // namespace pcam
