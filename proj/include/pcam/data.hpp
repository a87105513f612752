#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "exemplars.hpp"
#include "pcn.hpp"
#include "random.hpp"

namespace pcam {

struct TensorShape {
	Index channels = 1;
	Index height = 1;
	Index width = 1;

	Index size() const { return channels * height * width; }
	bool operator==(const TensorShape &) const = default;
};

/// Image with channel-major flattening: index = (c * H + y) * W + x.
struct ImageTensor {
	TensorShape shape;
	Vector pixels;

	ImageTensor() = default;
	ImageTensor(TensorShape s, Vector p) : shape(s), pixels(std::move(p))
	{
		if (pixels.size() != shape.size())
			throw dimension_error("pixel count " + std::to_string(pixels.size()) +
			                      " does not match shape");
	}
	explicit ImageTensor(TensorShape s) : shape(s), pixels(Vector::Zero(s.size())) {}

	double &at(Index c, Index y, Index x) { return pixels((c * shape.height + y) * shape.width + x); }
	double at(Index c, Index y, Index x) const
	{
		return pixels((c * shape.height + y) * shape.width + x);
	}

	const Vector &flatten() const { return pixels; }
};

enum class TensorFormat { ppm, pgm, pctn };

inline TensorFormat format_from_path(const std::string &path)
{
	auto ends_with = [&](std::string_view suf) {
		return path.size() >= suf.size() &&
		       path.compare(path.size() - suf.size(), suf.size(), suf) == 0;
	};
	if (ends_with(".ppm")) return TensorFormat::ppm;
	if (ends_with(".pgm")) return TensorFormat::pgm;
	if (ends_with(".pctn")) return TensorFormat::pctn;
	throw invalid_input("cannot infer tensor format from '" + path + "'");
}

namespace detail {

using Bytes = std::vector<unsigned char>;

inline void put_u32(Bytes &out, std::uint32_t v)
{
	for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_f32(Bytes &out, double v)
{
	put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

// Little-endian cursor over a byte buffer; every read reports its offset on
// failure.
class Reader {
public:
	explicit Reader(std::span<const unsigned char> data) : m_data(data) {}

	std::size_t offset() const { return m_pos; }
	bool at_end() const { return m_pos >= m_data.size(); }

	std::uint32_t u32(const char *what)
	{
		need(4, what);
		std::uint32_t v = 0;
		for (int i = 0; i < 4; ++i) v |= std::uint32_t(m_data[m_pos + i]) << (8 * i);
		m_pos += 4;
		return v;
	}

	double f32(const char *what) { return std::bit_cast<float>(u32(what)); }

	void expect(std::string_view magic)
	{
		need(magic.size(), "magic");
		if (std::memcmp(m_data.data() + m_pos, magic.data(), magic.size()) != 0)
			throw format_error("bad magic, expected '" + std::string(magic) + "'", m_pos);
		m_pos += magic.size();
	}

	void need(std::size_t n, const char *what) const
	{
		if (m_data.size() - std::min(m_pos, m_data.size()) < n)
			throw format_error(std::string("truncated while reading ") + what, m_pos);
	}

private:
	std::span<const unsigned char> m_data;
	std::size_t m_pos = 0;
};

inline Bytes read_file(const std::string &path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in) throw io_error("cannot open for reading", path);
	return Bytes(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::string &path, const Bytes &bytes)
{
	std::ofstream out(path, std::ios::binary);
	if (!out) throw io_error("cannot open for writing", path);
	out.write(reinterpret_cast<const char *>(bytes.data()),
	          static_cast<std::streamsize>(bytes.size()));
	if (!out) throw io_error("write failed", path);
}

// Skips whitespace and '#' comments (which run to end of line).
inline void pnm_skip(std::span<const unsigned char> data, std::size_t &pos)
{
	while (pos < data.size()) {
		if (data[pos] == '#') {
			while (pos < data.size() && data[pos] != '\n') ++pos;
		} else if (std::isspace(data[pos])) {
			++pos;
		} else {
			break;
		}
	}
}

// Header token of a binary PNM file.
inline std::uint32_t pnm_number(std::span<const unsigned char> data, std::size_t &pos)
{
	pnm_skip(data, pos);
	const std::size_t start = pos;
	std::uint64_t v = 0;
	while (pos < data.size() && std::isdigit(data[pos])) {
		v = v * 10 + (data[pos] - '0');
		if (v > 0xffffffffULL) throw format_error("header number too large", start);
		++pos;
	}
	if (pos == start) throw format_error("malformed header, expected a number", start);
	return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline detail::Bytes encode_tensor(const ImageTensor &t, TensorFormat format)
{
	detail::Bytes out;
	const TensorShape s = t.shape;
	if (format == TensorFormat::pctn) {
		out.insert(out.end(), {'P', 'C', 'T', 'N'});
		detail::put_u32(out, 1);
		detail::put_u32(out, 3);
		detail::put_u32(out, static_cast<std::uint32_t>(s.channels));
		detail::put_u32(out, static_cast<std::uint32_t>(s.height));
		detail::put_u32(out, static_cast<std::uint32_t>(s.width));
		for (Index i = 0; i < t.pixels.size(); ++i) detail::put_f32(out, t.pixels(i));
		return out;
	}
	const Index want = format == TensorFormat::ppm ? 3 : 1;
	if (s.channels != want)
		throw dimension_error(std::string(format == TensorFormat::ppm ? "PPM" : "PGM") +
		                      " needs " + std::to_string(want) + " channel(s)");
	const std::string header = std::string(format == TensorFormat::ppm ? "P6" : "P5") +
	                           "\n" + std::to_string(s.width) + " " +
	                           std::to_string(s.height) + "\n255\n";
	out.insert(out.end(), header.begin(), header.end());
	for (Index y = 0; y < s.height; ++y)
		for (Index x = 0; x < s.width; ++x)
			for (Index c = 0; c < s.channels; ++c) {
				const double v = std::clamp(t.at(c, y, x), 0.0, 1.0);
				out.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
			}
	return out;
}

inline ImageTensor decode_tensor(std::span<const unsigned char> data, TensorFormat format)
{
	if (format == TensorFormat::pctn) {
		detail::Reader r(data);
		r.expect("PCTN");
		const std::size_t version_at = r.offset();
		if (r.u32("version") != 1) throw format_error("unsupported PCTN version", version_at);
		const std::size_t rank_at = r.offset();
		const std::uint32_t rank = r.u32("rank");
		if (rank < 1 || rank > 3) throw format_error("PCTN rank must be 1..3", rank_at);
		std::array<Index, 3> dims{1, 1, 1};
		for (std::uint32_t i = 0; i < rank; ++i) {
			const std::size_t at = r.offset();
			dims[3 - rank + i] = r.u32("dimension");
			if (dims[3 - rank + i] == 0) throw format_error("zero dimension", at);
		}
		ImageTensor t(TensorShape{dims[0], dims[1], dims[2]});
		r.need(static_cast<std::size_t>(t.pixels.size()) * 4, "payload");
		for (Index i = 0; i < t.pixels.size(); ++i) t.pixels(i) = r.f32("payload");
		if (!r.at_end()) throw format_error("trailing bytes after payload", r.offset());
		return t;
	}
	const bool color = format == TensorFormat::ppm;
	if (data.size() < 2 || data[0] != 'P' || data[1] != (color ? '6' : '5'))
		throw format_error(std::string("expected ") + (color ? "P6" : "P5") + " magic", 0);
	std::size_t pos = 2;
	const std::uint32_t width = detail::pnm_number(data, pos);
	const std::uint32_t height = detail::pnm_number(data, pos);
	detail::pnm_skip(data, pos);
	const std::size_t maxval_at = pos;
	const std::uint32_t maxval = detail::pnm_number(data, pos);
	if (width == 0 || height == 0) throw format_error("zero image dimension", maxval_at);
	if (maxval != 255) throw format_error("unsupported maxval " + std::to_string(maxval), maxval_at);
	if (pos >= data.size() || !std::isspace(data[pos]))
		throw format_error("malformed header, expected whitespace", pos);
	++pos;
	const Index channels = color ? 3 : 1;
	ImageTensor t(TensorShape{channels, Index(height), Index(width)});
	const std::size_t need = std::size_t(channels) * width * height;
	if (data.size() - pos < need) throw format_error("truncated pixel payload", data.size());
	for (Index y = 0; y < Index(height); ++y)
		for (Index x = 0; x < Index(width); ++x)
			for (Index c = 0; c < channels; ++c) t.at(c, y, x) = data[pos++] / 255.0;
	return t;
}

inline ImageTensor read_tensor(const std::string &path, TensorFormat format)
{
	const auto bytes = detail::read_file(path);
	return decode_tensor(bytes, format);
}

inline ImageTensor read_tensor(const std::string &path)
{
	return read_tensor(path, format_from_path(path));
}

inline void write_tensor(const ImageTensor &t, const std::string &path, TensorFormat format)
{
	detail::write_file(path, encode_tensor(t, format));
}

inline void write_tensor(const ImageTensor &t, const std::string &path)
{
	write_tensor(t, path, format_from_path(path));
}

// ---------------------------------------------------------------------------
// Corruption

/// How the noise level passed to corrupt_gaussian is read.
enum class NoiseScale { variance, stddev };

/// Adds i.i.d. normal noise; no clipping.
inline Vector corrupt_gaussian(const Vector &x, double sigma, std::uint64_t seed,
                               NoiseScale scale = NoiseScale::variance)
{
	if (!(sigma >= 0.0)) throw invalid_input("noise level must be non-negative");
	if (sigma == 0.0) return x;
	const double sd = scale == NoiseScale::variance ? std::sqrt(sigma) : sigma;
	Rng rng = make_rng(seed, "gaussian-noise");
	std::normal_distribution<double> n(0.0, sd);
	Vector out = x;
	for (Index i = 0; i < out.size(); ++i) out(i) += n(rng);
	return out;
}

enum class MaskKind { random_pixels, center_patch, half_rows };

inline MaskKind parse_mask_kind(std::string_view name)
{
	if (name == "random_pixels" || name == "random") return MaskKind::random_pixels;
	if (name == "center_patch" || name == "patch") return MaskKind::center_patch;
	if (name == "half_rows" || name == "rows") return MaskKind::half_rows;
	throw invalid_input("unknown mask kind '" + std::string(name) + "'");
}

inline std::string_view to_string(MaskKind k)
{
	switch (k) {
	case MaskKind::random_pixels: return "random_pixels";
	case MaskKind::center_patch: return "center_patch";
	case MaskKind::half_rows: return "half_rows";
	}
	return "?";
}

/**
 * Known-entry mask (true = known) covering `fraction` of the input.
 *
 * random_pixels picks exactly round(fraction * d) entries. center_patch hides
 * a centred square of side round(sqrt((1 - fraction) * H * W)) in every
 * channel. half_rows keeps the top round(fraction * H) rows.
 */
inline Eigen::Array<bool, Eigen::Dynamic, 1> make_mask(Index d, MaskKind kind, double fraction,
                                                        TensorShape geometry, std::uint64_t seed)
{
	if (!(fraction > 0.0 && fraction <= 1.0))
		throw invalid_input("mask fraction must lie in (0, 1]");
	Eigen::Array<bool, Eigen::Dynamic, 1> mask(d);
	if (kind == MaskKind::random_pixels) {
		const auto known = static_cast<Index>(std::llround(fraction * double(d)));
		std::vector<Index> order(static_cast<std::size_t>(d));
		std::iota(order.begin(), order.end(), Index(0));
		Rng rng = make_rng(seed, "mask");
		std::shuffle(order.begin(), order.end(), rng);
		mask.setConstant(false);
		for (Index i = 0; i < known; ++i) mask(order[static_cast<std::size_t>(i)]) = true;
		return mask;
	}
	if (geometry.size() != d)
		throw dimension_error("mask geometry does not match the vector length");
	const Index H = geometry.height, W = geometry.width;
	mask.setConstant(true);
	if (kind == MaskKind::center_patch) {
		const double area = (1.0 - fraction) * double(H * W);
		const Index side = std::min({static_cast<Index>(std::llround(std::sqrt(area))), H, W});
		const Index y0 = (H - side) / 2, x0 = (W - side) / 2;
		for (Index c = 0; c < geometry.channels; ++c)
			for (Index y = y0; y < y0 + side; ++y)
				for (Index x = x0; x < x0 + side; ++x) mask((c * H + y) * W + x) = false;
	} else {
		const Index rows = static_cast<Index>(std::llround(fraction * double(H)));
		for (Index c = 0; c < geometry.channels; ++c)
			for (Index y = rows; y < H; ++y)
				for (Index x = 0; x < W; ++x) mask((c * H + y) * W + x) = false;
	}
	return mask;
}

/// Mask that is true exactly on `span`.
inline Eigen::Array<bool, Eigen::Dynamic, 1> span_mask(Index d, Span span)
{
	if (span.begin < 0 || span.end > d || span.begin >= span.end)
		throw invalid_input("span [" + std::to_string(span.begin) + ", " +
		                    std::to_string(span.end) + ") lies outside the vector");
	Eigen::Array<bool, Eigen::Dynamic, 1> mask = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(d, false);
	mask.segment(span.begin, span.size()).setConstant(true);
	return mask;
}

// ---------------------------------------------------------------------------
// Captions

inline std::vector<std::string> tokenize(const std::string &text)
{
	std::istringstream in(text);
	return {std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
}

/**
 * Ordered word list. Index 0 is the padding token, so a zero entry of an
 * encoded caption always decodes to padding.
 */
class Vocabulary {
public:
	static constexpr std::string_view pad_token = "<pad>";
	static constexpr std::size_t max_size = 1000;

	Vocabulary() { add(std::string(pad_token)); }

	explicit Vocabulary(const std::vector<std::string> &tokens)
	{
		if (tokens.empty() || tokens.front() != pad_token) add(std::string(pad_token));
		for (const auto &t : tokens) {
			if (m_index.count(t)) throw invalid_input("duplicate vocabulary token '" + t + "'");
			add(t);
		}
	}

	/// Pad token followed by every corpus word in order of first appearance.
	static Vocabulary from_corpus(const std::vector<std::string> &captions)
	{
		Vocabulary v;
		for (const auto &c : captions)
			for (const auto &w : tokenize(c))
				if (!v.m_index.count(w)) v.add(w);
		return v;
	}

	std::size_t size() const { return m_tokens.size(); }
	const std::string &token(std::size_t k) const { return m_tokens.at(k); }
	const std::vector<std::string> &tokens() const { return m_tokens; }
	bool contains(const std::string &w) const { return m_index.count(w) > 0; }

	std::size_t index(const std::string &w) const
	{
		auto it = m_index.find(w);
		if (it == m_index.end()) throw oov_error(w);
		return it->second;
	}

private:
	void add(std::string t)
	{
		if (m_tokens.size() >= max_size)
			throw invalid_input("vocabulary exceeds " + std::to_string(max_size) + " tokens");
		m_index.emplace(t, m_tokens.size());
		m_tokens.push_back(std::move(t));
	}

	std::vector<std::string> m_tokens;
	std::unordered_map<std::string, std::size_t> m_index;
};

/// Word k maps to k / V; unused trailing slots hold 0 (padding).
inline Vector encode_caption(const std::string &text, const Vocabulary &vocab,
                             Index pad_to = 25)
{
	const auto words = tokenize(text);
	if (Index(words.size()) > pad_to)
		throw caption_length_error("caption has " + std::to_string(words.size()) +
		                           " words, limit is " + std::to_string(pad_to));
	Vector v = Vector::Zero(pad_to);
	const double V = double(vocab.size());
	for (std::size_t i = 0; i < words.size(); ++i)
		v(Index(i)) = double(vocab.index(words[i])) / V;
	return v;
}

inline std::string decode_caption(const Vector &v, const Vocabulary &vocab)
{
	const double V = double(vocab.size());
	std::vector<std::size_t> codes;
	for (Index i = 0; i < v.size(); ++i) {
		const double k = std::round(v(i) * V);
		codes.push_back(static_cast<std::size_t>(std::clamp(k, 0.0, V - 1.0)));
	}
	while (!codes.empty() && codes.back() == 0) codes.pop_back();
	std::string out;
	for (std::size_t k : codes) {
		if (!out.empty()) out += ' ';
		out += vocab.token(k);
	}
	return out;
}

inline std::vector<std::string> read_lines(const std::string &path)
{
	std::ifstream in(path);
	if (!in) throw io_error("cannot open for reading", path);
	std::vector<std::string> lines;
	for (std::string line; std::getline(in, line);) {
		if (!line.empty() && line.back() == '\r') line.pop_back();
		lines.push_back(line);
	}
	return lines;
}

inline Vocabulary read_vocabulary(const std::string &path)
{
	auto lines = read_lines(path);
	while (!lines.empty() && lines.back().empty()) lines.pop_back();
	return Vocabulary(lines);
}

inline void write_vocabulary(const Vocabulary &vocab, const std::string &path)
{
	std::ofstream out(path);
	if (!out) throw io_error("cannot open for writing", path);
	for (const auto &t : vocab.tokens()) out << t << '\n';
}

/// Whitespace-normalised captions, one per non-empty line.
inline std::vector<std::string> read_captions(const std::string &path)
{
	std::vector<std::string> out;
	for (const auto &line : read_lines(path)) {
		const auto words = tokenize(line);
		if (words.empty()) continue;
		std::string c;
		for (const auto &w : words) c += (c.empty() ? "" : " ") + w;
		out.push_back(c);
	}
	return out;
}

// ---------------------------------------------------------------------------
// Procedural corpora

/**
 * Smooth textured images: a base colour, three oriented colour gratings and
 * two soft blobs, clipped to [0,1]. Item i depends only on (seed, i).
 */
inline ImageTensor procedural_image(TensorShape shape, std::uint64_t seed, std::size_t item)
{
	Rng rng = make_rng(seed, "procedural-image/" + std::to_string(item));
	std::uniform_real_distribution<double> unit(0.0, 1.0);
	auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
	const Index C = shape.channels, H = shape.height, W = shape.width;
	const double two_pi = 2.0 * std::numbers::pi;

	ImageTensor img(shape);
	std::vector<double> base(static_cast<std::size_t>(C));
	for (auto &b : base) b = uni(0.2, 0.8);

	struct Grating {
		double fx, fy, phase;
		std::vector<double> amp;
	};
	std::vector<Grating> gratings(3);
	for (auto &g : gratings) {
		g.fx = uni(1.0, 6.0);
		g.fy = uni(1.0, 6.0);
		g.phase = uni(0.0, two_pi);
		g.amp.resize(static_cast<std::size_t>(C));
		for (auto &a : g.amp) a = uni(0.05, 0.2) * (unit(rng) < 0.5 ? -1.0 : 1.0);
	}
	struct Blob {
		double cx, cy, r;
		std::vector<double> colour;
	};
	std::vector<Blob> blobs(2);
	for (auto &b : blobs) {
		b.cx = uni(0.0, 1.0);
		b.cy = uni(0.0, 1.0);
		b.r = uni(0.08, 0.3);
		b.colour.resize(static_cast<std::size_t>(C));
		for (auto &c : b.colour) c = uni(-0.3, 0.3);
	}

	for (Index y = 0; y < H; ++y) {
		const double v = H > 1 ? double(y) / double(H - 1) : 0.0;
		for (Index x = 0; x < W; ++x) {
			const double u = W > 1 ? double(x) / double(W - 1) : 0.0;
			for (Index c = 0; c < C; ++c) {
				const auto ci = static_cast<std::size_t>(c);
				double p = base[ci];
				for (const auto &g : gratings)
					p += g.amp[ci] * std::sin(two_pi * (g.fx * u + g.fy * v) + g.phase);
				for (const auto &b : blobs) {
					const double r2 = (u - b.cx) * (u - b.cx) + (v - b.cy) * (v - b.cy);
					p += b.colour[ci] * std::exp(-r2 / (2.0 * b.r * b.r));
				}
				img.at(c, y, x) = std::clamp(p, 0.0, 1.0);
			}
		}
	}
	return img;
}

inline ExemplarSet procedural_images(Index count, TensorShape shape, std::uint64_t seed)
{
	if (count < 1) throw invalid_input("corpus needs at least one item");
	ExemplarSet set;
	set.items.resize(shape.size(), count);
	for (Index i = 0; i < count; ++i)
		set.items.col(i) = procedural_image(shape, seed, static_cast<std::size_t>(i)).pixels;
	return set;
}

/// Images stacked above their encoded captions.
inline ExemplarSet captioned_set(const ExemplarSet &images, const std::vector<std::string> &captions,
                                 const Vocabulary &vocab, Index pad_to = 25)
{
	if (Index(captions.size()) < images.size())
		throw invalid_input("fewer captions than images");
	const Index d_img = images.dim();
	ExemplarSet set;
	set.items.resize(d_img + pad_to, images.size());
	for (Index i = 0; i < images.size(); ++i) {
		set.items.col(i).head(d_img) = images.items.col(i);
		set.items.col(i).tail(pad_to) =
		    encode_caption(captions[static_cast<std::size_t>(i)], vocab, pad_to);
	}
	set.layout = ModalityLayout{Span{0, d_img}, Span{d_img, d_img + pad_to}};
	return set;
}

}  // namespace pcam
