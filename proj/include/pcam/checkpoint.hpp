#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "data.hpp"
#include "pcn.hpp"

// "PCAM" model container, little-endian throughout:
//
//   "PCAM"  u32 version  u32 code  <body>
//
// code 0..2      PCN with that activation: u32 depth, depth+1 u32 widths,
//                theta^1..theta^L row-major f32, then b as f32
// code 0x100     MHN: u32 d, u32 M, u32 copies, f32 beta, M patterns of d f32
// code 0x200|a   autoencoder with hidden activation a: u32 layer count,
//                widths (u32 each), then per layer W row-major and bias, f32

namespace pcam {

inline constexpr std::uint32_t checkpoint_version = 1;
inline constexpr std::uint32_t mhn_code = 0x100;
inline constexpr std::uint32_t ae_code = 0x200;

enum class ModelKind { pcn, mhn, ae };

namespace detail {

inline void put_header(Bytes &out, std::uint32_t code)
{
	out.insert(out.end(), {'P', 'C', 'A', 'M'});
	put_u32(out, checkpoint_version);
	put_u32(out, code);
}

inline void put_row_major(Bytes &out, const Matrix &m)
{
	for (Index i = 0; i < m.rows(); ++i)
		for (Index j = 0; j < m.cols(); ++j) put_f32(out, m(i, j));
}

inline Matrix get_row_major(Reader &r, Index rows, Index cols)
{
	r.need(static_cast<std::size_t>(rows * cols) * 4, "matrix payload");
	Matrix m(rows, cols);
	for (Index i = 0; i < rows; ++i)
		for (Index j = 0; j < cols; ++j) m(i, j) = r.f32("matrix payload");
	return m;
}

inline std::uint32_t read_header(Reader &r)
{
	r.expect("PCAM");
	const std::size_t at = r.offset();
	if (r.u32("version") != checkpoint_version)
		throw format_error("unsupported checkpoint version", at);
	return r.u32("model code");
}

inline Activation activation_from_code(std::uint32_t code, std::size_t at)
{
	if (code > 2) throw format_error("unknown activation code " + std::to_string(code), at);
	return static_cast<Activation>(code);
}

inline std::vector<Index> read_widths(Reader &r, std::uint32_t count)
{
	std::vector<Index> widths;
	for (std::uint32_t i = 0; i < count; ++i) {
		const std::size_t at = r.offset();
		const std::uint32_t w = r.u32("width");
		if (w == 0) throw format_error("zero layer width", at);
		widths.push_back(w);
	}
	return widths;
}

inline void expect_end(const Reader &r)
{
	if (!r.at_end()) throw format_error("trailing bytes after model", r.offset());
}

}  // namespace detail

inline detail::Bytes encode_checkpoint(const PcnModel &m)
{
	m.validate();
	detail::Bytes out;
	detail::put_header(out, static_cast<std::uint32_t>(m.activation));
	detail::put_u32(out, static_cast<std::uint32_t>(m.depth()));
	for (Index w : m.widths) detail::put_u32(out, static_cast<std::uint32_t>(w));
	for (const Matrix &w : m.weights) detail::put_row_major(out, w);
	for (Index i = 0; i < m.memory.size(); ++i) detail::put_f32(out, m.memory(i));
	return out;
}

inline detail::Bytes encode_checkpoint(const MhnModel &m)
{
	detail::Bytes out;
	detail::put_header(out, mhn_code);
	detail::put_u32(out, static_cast<std::uint32_t>(m.patterns.rows()));
	detail::put_u32(out, static_cast<std::uint32_t>(m.patterns.cols()));
	detail::put_u32(out, static_cast<std::uint32_t>(m.copies));
	detail::put_f32(out, m.beta);
	detail::put_row_major(out, m.patterns.transpose());
	return out;
}

inline detail::Bytes encode_checkpoint(const AeModel &m)
{
	detail::Bytes out;
	detail::put_header(out, ae_code | static_cast<std::uint32_t>(m.activation));
	detail::put_u32(out, static_cast<std::uint32_t>(m.widths.size()));
	for (Index w : m.widths) detail::put_u32(out, static_cast<std::uint32_t>(w));
	for (std::size_t l = 0; l < m.weights.size(); ++l) {
		detail::put_row_major(out, m.weights[l]);
		for (Index i = 0; i < m.biases[l].size(); ++i) detail::put_f32(out, m.biases[l](i));
	}
	return out;
}

inline ModelKind checkpoint_kind(std::span<const unsigned char> bytes)
{
	detail::Reader r(bytes);
	const std::size_t at = 8;
	const std::uint32_t code = detail::read_header(r);
	if (code <= 2) return ModelKind::pcn;
	if (code == mhn_code) return ModelKind::mhn;
	if ((code & ~0xffU) == ae_code && (code & 0xff) <= 2) return ModelKind::ae;
	throw format_error("unknown model code " + std::to_string(code), at);
}

inline PcnModel decode_pcn(std::span<const unsigned char> bytes)
{
	detail::Reader r(bytes);
	const std::size_t code_at = 8;
	const std::uint32_t code = detail::read_header(r);
	PcnModel m;
	m.activation = detail::activation_from_code(code, code_at);
	const std::size_t depth_at = r.offset();
	const std::uint32_t depth = r.u32("depth");
	if (depth == 0) throw format_error("depth must be >= 1", depth_at);
	m.widths = detail::read_widths(r, depth + 1);
	for (std::uint32_t l = 1; l <= depth; ++l)
		m.weights.push_back(detail::get_row_major(r, m.widths[l - 1], m.widths[l]));
	m.memory = detail::get_row_major(r, m.widths.back(), 1).col(0);
	detail::expect_end(r);
	return m;
}

inline MhnModel decode_mhn(std::span<const unsigned char> bytes)
{
	detail::Reader r(bytes);
	if (detail::read_header(r) != mhn_code) throw format_error("not a Hopfield checkpoint", 8);
	MhnModel m;
	const Index d = r.u32("d"), M = r.u32("M");
	m.copies = static_cast<int>(r.u32("copies"));
	m.beta = r.f32("beta");
	m.patterns = detail::get_row_major(r, M, d).transpose();
	detail::expect_end(r);
	return m;
}

inline AeModel decode_ae(std::span<const unsigned char> bytes)
{
	detail::Reader r(bytes);
	const std::uint32_t code = detail::read_header(r);
	if ((code & ~0xffU) != ae_code) throw format_error("not an autoencoder checkpoint", 8);
	AeModel m;
	m.activation = detail::activation_from_code(code & 0xff, 8);
	const std::size_t at = r.offset();
	const std::uint32_t layers = r.u32("layer count");
	if (layers < 3) throw format_error("autoencoder needs at least 3 layers", at);
	m.widths = detail::read_widths(r, layers);
	for (std::uint32_t l = 0; l + 1 < layers; ++l) {
		m.weights.push_back(detail::get_row_major(r, m.widths[l + 1], m.widths[l]));
		m.biases.push_back(detail::get_row_major(r, m.widths[l + 1], 1).col(0));
	}
	detail::expect_end(r);
	return m;
}

template <typename Model>
void save_model(const Model &m, const std::string &path)
{
	detail::write_file(path, encode_checkpoint(m));
}

inline PcnModel load_pcn(const std::string &path) { return decode_pcn(detail::read_file(path)); }
inline MhnModel load_mhn(const std::string &path) { return decode_mhn(detail::read_file(path)); }
inline AeModel load_ae(const std::string &path) { return decode_ae(detail::read_file(path)); }

}  // namespace pcam
