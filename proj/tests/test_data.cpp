#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "pcam/data.hpp"
#include "pcam/grid.hpp"

using namespace pcam;

namespace {

std::string temp_path(const std::string &name)
{
	const auto dir = std::filesystem::temp_directory_path() / "pcam_test_data";
	std::filesystem::create_directories(dir);
	return (dir / name).string();
}

detail::Bytes bytes_of(const std::string &s) { return detail::Bytes(s.begin(), s.end()); }

ImageTensor random_image(TensorShape shape, std::uint64_t seed)
{
	Rng rng = make_rng(seed, "test-image");
	std::uniform_real_distribution<double> u(0.0, 1.0);
	ImageTensor t(shape);
	for (Index i = 0; i < t.pixels.size(); ++i) t.pixels(i) = u(rng);
	return t;
}

}  // namespace

TEST(ImageTensor, ChannelMajorLayout)
{
	ImageTensor t(TensorShape{3, 2, 4});
	for (Index i = 0; i < t.pixels.size(); ++i) t.pixels(i) = double(i) / 24.0;
	EXPECT_EQ(t.at(1, 0, 0), t.pixels(8));
	EXPECT_EQ(t.at(2, 1, 3), t.pixels(23));
	EXPECT_THROW(ImageTensor(TensorShape{3, 2, 4}, Vector::Zero(5)), dimension_error);
}

TEST(Ppm, AllBlack)
{
	const auto bytes = bytes_of(std::string("P6\n2 2\n255\n") + std::string(12, '\0'));
	const ImageTensor t = decode_tensor(bytes, TensorFormat::ppm);
	EXPECT_EQ(t.shape.channels, 3);
	EXPECT_EQ(t.pixels.size(), 12);
	EXPECT_EQ(t.pixels.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Ppm, ByteRoundTripExact)
{
	for (TensorFormat f : {TensorFormat::ppm, TensorFormat::pgm}) {
		const Index c = f == TensorFormat::ppm ? 3 : 1;
		const ImageTensor t = random_image({c, 5, 7}, 3);
		const auto bytes = encode_tensor(t, f);
		const ImageTensor back = decode_tensor(bytes, f);
		EXPECT_LE((back.pixels - t.pixels).cwiseAbs().maxCoeff(), 1.0 / 510.0 + 1e-12);
		EXPECT_EQ(encode_tensor(back, f), bytes);
		// Quantized values survive exactly.
		EXPECT_EQ(decode_tensor(encode_tensor(back, f), f).pixels, back.pixels);
	}
}

TEST(Ppm, HeaderComments)
{
	const auto bytes = bytes_of(std::string("P5\n# made by hand\n3 1 # width height\n255\n") +
	                            std::string("\x00\x80\xff", 3));
	const ImageTensor t = decode_tensor(bytes, TensorFormat::pgm);
	EXPECT_EQ(t.shape.width, 3);
	EXPECT_DOUBLE_EQ(t.pixels(1), 128.0 / 255.0);
	EXPECT_DOUBLE_EQ(t.pixels(2), 1.0);
}

TEST(Ppm, FormatErrorsCarryOffsets)
{
	try {
		decode_tensor(bytes_of("P6\n2 2\n65535\n" + std::string(24, '\0')), TensorFormat::ppm);
		FAIL();
	} catch (const format_error &e) {
		EXPECT_EQ(e.offset, 7u);
	}
	EXPECT_THROW(decode_tensor(bytes_of("P3\n1 1\n255\n"), TensorFormat::ppm), format_error);
	EXPECT_THROW(decode_tensor(bytes_of("P6\n1 1\n255\n"), TensorFormat::pgm), format_error);
	try {
		decode_tensor(bytes_of("P6\n2 2\n255\n" + std::string(5, '\0')), TensorFormat::ppm);
		FAIL();
	} catch (const format_error &e) {
		EXPECT_GT(e.offset, 10u);
	}
	EXPECT_THROW(decode_tensor(bytes_of("P6\nx 2\n255\n"), TensorFormat::ppm), format_error);
	EXPECT_THROW(decode_tensor(bytes_of("P6\n2"), TensorFormat::ppm), format_error);
	EXPECT_THROW(encode_tensor(random_image({1, 2, 2}, 1), TensorFormat::ppm), dimension_error);
}

TEST(Pctn, RoundTripBitExact)
{
	ImageTensor t = random_image({3, 4, 6}, 9);
	t.pixels = t.pixels.cast<float>().cast<double>();
	const auto bytes = encode_tensor(t, TensorFormat::pctn);
	const ImageTensor back = decode_tensor(bytes, TensorFormat::pctn);
	EXPECT_TRUE(back.shape == t.shape);
	EXPECT_EQ(back.pixels, t.pixels);
	EXPECT_EQ(encode_tensor(back, TensorFormat::pctn), bytes);
	// Layout: magic, version, rank, dims, payload.
	ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 12 + 4 * 72);
	EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PCTN");
	EXPECT_EQ(bytes[4], 1);
	EXPECT_EQ(bytes[8], 3);
	EXPECT_EQ(bytes[12], 3);
	EXPECT_EQ(bytes[16], 4);
	EXPECT_EQ(bytes[20], 6);
}

TEST(Pctn, Errors)
{
	auto bytes = encode_tensor(random_image({1, 2, 2}, 1), TensorFormat::pctn);
	auto bad = bytes;
	bad[1] = 'X';
	EXPECT_THROW(decode_tensor(bad, TensorFormat::pctn), format_error);
	bad = bytes;
	bad[4] = 2;
	try {
		decode_tensor(bad, TensorFormat::pctn);
		FAIL();
	} catch (const format_error &e) {
		EXPECT_EQ(e.offset, 4u);
	}
	bad = bytes;
	bad.pop_back();
	EXPECT_THROW(decode_tensor(bad, TensorFormat::pctn), format_error);
	bad = bytes;
	bad.push_back(0);
	EXPECT_THROW(decode_tensor(bad, TensorFormat::pctn), format_error);
}

TEST(TensorFiles, WriteReadAndMissingPath)
{
	const ImageTensor t = random_image({3, 3, 3}, 4);
	const std::string p = temp_path("t.ppm");
	write_tensor(t, p);
	EXPECT_EQ(encode_tensor(read_tensor(p), TensorFormat::ppm), encode_tensor(t, TensorFormat::ppm));
	EXPECT_THROW(read_tensor(temp_path("missing.pgm")), io_error);
	EXPECT_THROW(format_from_path("x.jpg"), invalid_input);
}

TEST(Noise, ZeroSigmaAndDeterminism)
{
	const Vector x = Vector::Constant(50, 0.5);
	EXPECT_EQ(corrupt_gaussian(x, 0.0, 1), x);
	EXPECT_EQ(corrupt_gaussian(x, 0.2, 3), corrupt_gaussian(x, 0.2, 3));
	EXPECT_NE(corrupt_gaussian(x, 0.2, 3), corrupt_gaussian(x, 0.2, 4));
	EXPECT_THROW(corrupt_gaussian(x, -0.1, 1), invalid_input);
}

TEST(Noise, VarianceReading)
{
	const Index d = 200000;
	const Vector x = Vector::Constant(d, 0.5);
	const Vector diff = corrupt_gaussian(x, 0.2, 11) - x;
	const double mean = diff.mean();
	const double var = (diff.array() - mean).square().sum() / double(d - 1);
	EXPECT_NEAR(var, 0.2, 0.05 * 0.2);
	EXPECT_LT(std::abs(mean), 3.0 * std::sqrt(0.2) / std::sqrt(double(d)));
	EXPECT_GT(diff.maxCoeff(), 0.5);  // no clipping

	const Vector sd = corrupt_gaussian(x, 0.2, 11, NoiseScale::stddev) - x;
	const double var_sd = (sd.array() - sd.mean()).square().sum() / double(d - 1);
	EXPECT_NEAR(var_sd, 0.04, 0.05 * 0.04);
}

TEST(Mask, FullFraction)
{
	for (MaskKind k : {MaskKind::random_pixels, MaskKind::center_patch, MaskKind::half_rows})
		EXPECT_TRUE(make_mask(3 * 8 * 8, k, 1.0, {3, 8, 8}, 1).all());
}

TEST(Mask, RandomPixelsExactCount)
{
	const auto m = make_mask(1000, MaskKind::random_pixels, 0.25, {1, 1, 1000}, 7);
	EXPECT_EQ(m.count(), 250);
	EXPECT_TRUE((m == make_mask(1000, MaskKind::random_pixels, 0.25, {1, 1, 1000}, 7)).all());
	EXPECT_FALSE((m == make_mask(1000, MaskKind::random_pixels, 0.25, {1, 1, 1000}, 8)).all());
	for (double f : {0.5, 0.125, 1.0 / 16.0})
		EXPECT_EQ(make_mask(3072, MaskKind::random_pixels, f, {3, 32, 32}, 1).count(),
		          std::llround(f * 3072));
}

TEST(Mask, CenterPatchGeometry)
{
	const auto m = make_mask(3072, MaskKind::center_patch, 0.75, {3, 32, 32}, 0);
	for (Index c = 0; c < 3; ++c) {
		Index unknown = 0;
		for (Index y = 0; y < 32; ++y)
			for (Index x = 0; x < 32; ++x) {
				const bool inside = y >= 8 && y < 24 && x >= 8 && x < 24;
				EXPECT_EQ(m((c * 32 + y) * 32 + x), !inside);
				unknown += !m((c * 32 + y) * 32 + x);
			}
		EXPECT_EQ(unknown, 256);
	}
}

TEST(Mask, HalfRows)
{
	const auto m = make_mask(2 * 4 * 3, MaskKind::half_rows, 0.5, {2, 4, 3}, 0);
	for (Index c = 0; c < 2; ++c)
		for (Index y = 0; y < 4; ++y)
			for (Index x = 0; x < 3; ++x) EXPECT_EQ(m((c * 4 + y) * 3 + x), y < 2);
}

TEST(Mask, Contracts)
{
	EXPECT_THROW(make_mask(10, MaskKind::random_pixels, 0.0, {1, 1, 10}, 0), invalid_input);
	EXPECT_THROW(make_mask(10, MaskKind::random_pixels, 1.5, {1, 1, 10}, 0), invalid_input);
	EXPECT_THROW(make_mask(10, MaskKind::center_patch, 0.5, {3, 2, 2}, 0), dimension_error);
	EXPECT_THROW(parse_mask_kind("diagonal"), invalid_input);
	EXPECT_THROW(span_mask(10, Span{5, 11}), invalid_input);
	EXPECT_EQ(span_mask(10, Span{2, 5}).count(), 3);
}

TEST(Caption, EmptyIsPadding)
{
	const auto vocab = Vocabulary::from_corpus({"a b c"});
	const Vector v = encode_caption("", vocab);
	EXPECT_EQ(v.size(), 25);
	EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
	EXPECT_EQ(decode_caption(v, vocab), "");
}

TEST(Caption, CodesAreKOverV)
{
	const auto vocab = Vocabulary::from_corpus({"the cat sat", "the dog"});
	ASSERT_EQ(vocab.size(), 5u);  // <pad> the cat sat dog
	const Vector v = encode_caption("dog sat the", vocab, 6);
	EXPECT_DOUBLE_EQ(v(0), 4.0 / 5.0);
	EXPECT_DOUBLE_EQ(v(1), 3.0 / 5.0);
	EXPECT_DOUBLE_EQ(v(2), 1.0 / 5.0);
	EXPECT_EQ(v.tail(3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Caption, RoundingTolerance)
{
	const auto vocab = Vocabulary::from_corpus({"one two three four five six seven"});
	const double V = double(vocab.size());
	Vector v = encode_caption("three seven one", vocab, 5);
	const double eps = 0.999 / (2.0 * V);
	Vector up = v, down = v;
	up.head(3).array() += eps;
	down.head(3).array() -= eps;
	EXPECT_EQ(decode_caption(up, vocab), "three seven one");
	EXPECT_EQ(decode_caption(down, vocab), "three seven one");
	Vector far = v;
	far(0) += 1.01 / V;
	EXPECT_NE(decode_caption(far, vocab), "three seven one");
	// Out-of-range codes clamp to the vocabulary.
	Vector wild = Vector::Zero(2);
	wild(0) = 7.0;
	EXPECT_EQ(decode_caption(wild, vocab), "seven");
}

TEST(Caption, Errors)
{
	const auto vocab = Vocabulary::from_corpus({"a b"});
	try {
		encode_caption("a zebra", vocab);
		FAIL();
	} catch (const oov_error &e) {
		EXPECT_EQ(e.word, "zebra");
	}
	EXPECT_THROW(encode_caption("a b a b", vocab, 3), caption_length_error);
	EXPECT_THROW(Vocabulary(std::vector<std::string>{"x", "x"}), invalid_input);
	std::vector<std::string> many;
	for (int i = 0; i < 1000; ++i) many.push_back("w" + std::to_string(i));
	EXPECT_THROW(Vocabulary{many}, invalid_input);
}

TEST(Caption, BundledCorpusRoundTrip)
{
	const auto captions = read_captions(std::string(PCAM_DATA_DIR) + "/captions.txt");
	ASSERT_GE(captions.size(), 10u);
	ASSERT_LE(captions.size(), 100u);
	const auto vocab = read_vocabulary(std::string(PCAM_DATA_DIR) + "/vocab.txt");
	EXPECT_LE(vocab.size(), 1000u);
	EXPECT_EQ(vocab.token(0), std::string(Vocabulary::pad_token));
	const auto rebuilt = Vocabulary::from_corpus(captions);
	EXPECT_EQ(rebuilt.tokens(), vocab.tokens());
	for (const auto &c : captions) {
		const Vector v = encode_caption(c, vocab);
		EXPECT_EQ(decode_caption(v, vocab), c);
		EXPECT_EQ(encode_caption(decode_caption(v, vocab), vocab), v);
		for (Index i = 0; i < v.size(); ++i) {
			const double k = v(i) * double(vocab.size());
			EXPECT_NEAR(k, std::round(k), 1e-9);
		}
	}
}

TEST(Caption, VocabularyFileRoundTrip)
{
	const auto vocab = Vocabulary::from_corpus({"red green", "blue red"});
	const std::string p = temp_path("vocab.txt");
	write_vocabulary(vocab, p);
	EXPECT_EQ(read_vocabulary(p).tokens(), vocab.tokens());
	EXPECT_THROW(read_vocabulary(temp_path("nope.txt")), io_error);
}

TEST(Procedural, DeterministicAndInRange)
{
	const auto a = procedural_images(5, {3, 16, 16}, 2);
	const auto b = procedural_images(5, {3, 16, 16}, 2);
	EXPECT_EQ(a.items, b.items);
	EXPECT_GE(a.items.minCoeff(), 0.0);
	EXPECT_LE(a.items.maxCoeff(), 1.0);
	EXPECT_NE(a.items.col(0), a.items.col(1));
	// Item i does not depend on how many items are drawn.
	EXPECT_EQ(procedural_images(2, {3, 16, 16}, 2).items, a.items.leftCols(2));
	EXPECT_NO_THROW(a.validate());
}

TEST(Procedural, CaptionedLayout)
{
	const auto images = procedural_images(3, {3, 4, 4}, 1);
	const std::vector<std::string> caps{"a b", "b c", "c"};
	const auto vocab = Vocabulary::from_corpus(caps);
	const auto set = captioned_set(images, caps, vocab, 5);
	ASSERT_TRUE(set.layout.has_value());
	EXPECT_EQ(set.layout->image, (Span{0, 48}));
	EXPECT_EQ(set.layout->caption, (Span{48, 53}));
	EXPECT_NO_THROW(set.validate());
	EXPECT_EQ(decode_caption(set.items.col(1).tail(5), vocab), "b c");
	EXPECT_THROW(captioned_set(images, {"a"}, vocab, 5), invalid_input);
}

TEST(ExemplarSet, Validation)
{
	ExemplarSet s;
	s.items = Matrix::Constant(4, 2, 0.5);
	EXPECT_NO_THROW(s.validate());
	s.items(0, 0) = 1.5;
	EXPECT_THROW(s.validate(), invalid_input);
	s.items(0, 0) = 0.5;
	s.layout = ModalityLayout{Span{0, 2}, Span{3, 4}};
	EXPECT_THROW(s.validate(), invalid_input);
	s.layout = ModalityLayout{Span{0, 2}, Span{2, 4}};
	EXPECT_NO_THROW(s.validate());
}

TEST(Grid, SingleTileHasNoSeparators)
{
	const ImageTensor t = random_image({3, 5, 4}, 2);
	const ImageTensor g = tile_grid({{t}});
	EXPECT_TRUE(g.shape == t.shape);
	EXPECT_EQ(g.pixels, t.pixels);
}

TEST(Grid, TilingArithmetic)
{
	const ImageTensor t = random_image({3, 32, 32}, 2);
	const std::vector<std::vector<ImageTensor>> rows(4, std::vector<ImageTensor>(10, t));
	const ImageTensor g = tile_grid(rows);
	EXPECT_EQ(g.shape.height, 134);
	EXPECT_EQ(g.shape.width, 338);
	EXPECT_EQ(g.at(0, 32, 0), 1.0);  // separator row
	EXPECT_EQ(g.at(1, 0, 33), 1.0);  // separator column
	EXPECT_EQ(g.at(2, 34 + 3, 34 + 5), t.at(2, 3, 5));
}

TEST(Grid, DifferenceOfIdenticalIsBlack)
{
	const ImageTensor t = random_image({3, 6, 6}, 3);
	EXPECT_EQ(difference_image(t, t).pixels.cwiseAbs().maxCoeff(), 0.0);
	ImageTensor u = t;
	u.pixels(4) += 0.5;
	u.pixels(7) -= 0.25;
	const ImageTensor d = difference_image(t, u);
	EXPECT_DOUBLE_EQ(d.pixels(4), 1.0);
	EXPECT_DOUBLE_EQ(d.pixels(7), 0.5);
}

TEST(Grid, GreyscaleAndErrors)
{
	const ImageTensor grey = random_image({1, 3, 3}, 1);
	const ImageTensor g = tile_grid({{grey}});
	EXPECT_EQ(g.shape.channels, 3);
	EXPECT_EQ(g.at(0, 1, 1), grey.at(0, 1, 1));
	EXPECT_EQ(g.at(2, 1, 1), grey.at(0, 1, 1));
	EXPECT_THROW(tile_grid({{grey, random_image({1, 3, 4}, 1)}}), dimension_error);
	EXPECT_THROW(tile_grid({{grey, grey}, {grey}}), dimension_error);
	EXPECT_THROW(tile_grid({}), dimension_error);
	EXPECT_THROW(difference_image(grey, random_image({3, 3, 3}, 1)), dimension_error);
	const std::string p = temp_path("grid.ppm");
	emit_grid({{grey, grey}}, p);
	EXPECT_EQ(read_tensor(p).shape.width, 8);
}
