#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "groce/embedstore.hpp"
#include "test_support.hpp"

namespace groce {
namespace {

using testing::TempDir;

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

TEST(EmbedStoreTest, LoadsUnitRowsUnchanged) {
    TempDir dir;
    const auto path = dir.file("t.txt");
    write_text(path, "# three unit rows\na 1 0 0 0\nb 0 1 0 0\n\nc 0 0 0.6 0.8\n");
    const auto t = load_table(path, TableFormat::text);
    EXPECT_EQ(t.count(), 3u);
    EXPECT_EQ(t.dim(), 4u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(norm(t.row(i)), 1.0, 1e-7);
    EXPECT_FLOAT_EQ(t.row(2)[3], 0.8f);
}

TEST(EmbedStoreTest, RenormalizesWithoutChangingDirection) {
    TempDir dir;
    const auto path = dir.file("t.txt");
    write_text(path, "x 1.2 1.6 0 0\n");  // norm 2.0
    const auto t = load_table(path, TableFormat::text);
    EXPECT_NEAR(norm(t.row(0)), 1.0, 1e-7);
    const std::vector<float> original{1.2f, 1.6f, 0.0f, 0.0f};
    EXPECT_NEAR(dot(t.row(0), original) / norm(original), 1.0, 1e-6);
}

TEST(EmbedStoreTest, RejectsDuplicateLabelNamingIt) {
    TempDir dir;
    const auto path = dir.file("t.txt");
    write_text(path, "bear 1 0\nbear 0 1\n");
    try {
        load_table(path, TableFormat::text);
        FAIL() << "expected duplicate-label error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("bear"), std::string::npos);
    }
}

TEST(EmbedStoreTest, MalformedRowReportsLine) {
    TempDir dir;
    const auto path = dir.file("t.txt");
    write_text(path, "a 1 0 0\n# comment\nb 1 0\n");
    try {
        load_table(path, TableFormat::text);
        FAIL() << "expected parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(EmbedStoreTest, ZeroVectorRejected) {
    TempDir dir;
    const auto path = dir.file("t.txt");
    write_text(path, "a 1 0\nz 0 0\n");
    EXPECT_THROW(load_table(path, TableFormat::text), ValidationError);
}

TEST(EmbedStoreTest, MissingFileIsIoError) {
    EXPECT_THROW(load_table("/nonexistent/groce.txt", TableFormat::text), IoError);
}

TEST(EmbedStoreTest, BinaryRoundTripIsBitExact) {
    TempDir dir;
    const auto t = testing::random_table(100, 64, 11);
    save_table(t, dir.file("t.bin"), TableFormat::binary);
    const auto back = load_table(dir.file("t.bin"), TableFormat::binary);
    EXPECT_EQ(back.labels(), t.labels());
    ASSERT_EQ(back.data().size(), t.data().size());
    EXPECT_EQ(std::memcmp(back.data().data(), t.data().data(), t.data().size() * sizeof(float)), 0);
    EXPECT_EQ(back.content_hash(), t.content_hash());
}

TEST(EmbedStoreTest, TextRoundTripWithinDecimalPrecision) {
    TempDir dir;
    const auto t = testing::random_table(50, 32, 12);
    save_table(t, dir.file("t.txt"), TableFormat::text);
    const auto back = load_table(dir.file("t.txt"), TableFormat::text);
    EXPECT_EQ(back.labels(), t.labels());
    double worst = 0;
    for (std::size_t k = 0; k < t.data().size(); ++k) worst = std::max(worst, double(std::abs(back.data()[k] - t.data()[k])));
    EXPECT_LE(worst, 1e-6);
}

TEST(EmbedStoreTest, SaveToUnwritablePathIsIoError) {
    const auto t = testing::random_table(3, 4, 1);
    EXPECT_THROW(save_table(t, "/nonexistent-dir/t.bin", TableFormat::binary), IoError);
    EXPECT_THROW(save_table(t, "/nonexistent-dir/t.txt", TableFormat::text), IoError);
}

TEST(EmbedStoreTest, BinaryWrongMagicIsFormatError) {
    TempDir dir;
    write_text(dir.file("bad.bin"), "NOTMAGIC\x01\x00\x00\x00");
    EXPECT_THROW(load_table(dir.file("bad.bin"), TableFormat::binary), FormatError);
}

TEST(EmbedStoreTest, NormalizationIsIdempotent) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto v = testing::random_vector(37, seed);
        normalize_in_place(v);
        auto again = v;
        normalize_in_place(again);
        for (std::size_t k = 0; k < v.size(); ++k) ASSERT_NEAR(v[k], again[k], 1e-7);
    }
}

TEST(EmbedStoreTest, LabelLookupIsTotal) {
    const auto t = testing::random_table(200, 8, 3);
    for (std::size_t i = 0; i < t.count(); ++i) {
        const auto id = t.find(t.label(i));
        ASSERT_TRUE(id.has_value());
        EXPECT_EQ(*id, i);
    }
    EXPECT_FALSE(t.find("absent").has_value());
    EXPECT_THROW(t.index_of("absent"), ResolutionError);
}

TEST(EmbedStoreTest, TableInvariantsEnforced) {
    EXPECT_THROW(EmbeddingTable::from_rows({"a"}, {1.0f}, 1), ValidationError);
    EXPECT_THROW(EmbeddingTable::from_rows({}, {}, 4), ValidationError);
}

TEST(PromptTest, LoadsWellFormedPrompt) {
    TempDir dir;
    const auto v = testing::random_vector(5 * 64, 9);
    const auto p = PromptEmbedding::from_rows(v, 64);
    save_prompt(p, dir.file("p.bin"));
    const auto back = load_prompt(dir.file("p.bin"));
    EXPECT_EQ(back.length(), 5u);
    EXPECT_EQ(back.dim, 64u);
    EXPECT_EQ(back.tokens, v);  // magnitudes preserved, no normalization
}

TEST(PromptTest, SingleTokenPromptIsValid) {
    TempDir dir;
    save_prompt(PromptEmbedding::from_rows({3.0f, 4.0f}, 2), dir.file("p.bin"));
    const auto back = load_prompt(dir.file("p.bin"));
    EXPECT_EQ(back.length(), 1u);
    EXPECT_FLOAT_EQ(back.token(0)[1], 4.0f);
}

TEST(PromptTest, TruncatedPayloadReportsByteCounts) {
    TempDir dir;
    save_prompt(PromptEmbedding::from_rows(testing::random_vector(5 * 64, 1), 64), dir.file("p.bin"));
    std::filesystem::resize_file(dir.file("p.bin"), std::filesystem::file_size(dir.file("p.bin")) - 8);
    try {
        load_prompt(dir.file("p.bin"));
        FAIL() << "expected format error";
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("1280"), std::string::npos) << msg;
        EXPECT_NE(msg.find("1272"), std::string::npos) << msg;
    }
}

}  // namespace
}  // namespace groce
