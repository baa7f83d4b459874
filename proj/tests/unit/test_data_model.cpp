#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "helpers.hpp"
#include "valmon/csv.hpp"
#include "valmon/data_model.hpp"

using namespace valmon;

namespace {

Schema scored_schema() {
  return Schema({{"x", ColumnKind::numeric, ColumnRole::feature, std::nullopt, std::nullopt},
                 {"color", ColumnKind::categorical, ColumnRole::feature, std::nullopt, std::nullopt},
                 {"y", ColumnKind::numeric, ColumnRole::target, std::nullopt, std::nullopt},
                 {"yhat", ColumnKind::numeric, ColumnRole::prediction, std::nullopt, std::nullopt},
                 {"ts", ColumnKind::categorical, ColumnRole::timestamp, std::nullopt, std::nullopt}});
}

const char *kCsv =
    "ts,color,x,y,yhat,extra\n"
    "2024-01-02,red,1.5,1,0.5,foo\n"
    "2024-01-01,\"bl,ue\",NA,0,0.25,bar\n"
    "2024-01-03,,3,1,1,baz\n";

}  // namespace

TEST(Csv, QuotedFieldsAndCrlf) {
  const auto rows = csv::parse("a,b\r\n\"x,\"\"y\"\"\",2\r\n\"multi\nline\",3\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "x,\"y\"");
  EXPECT_EQ(rows[2][0], "multi\nline");
  EXPECT_THROW(csv::parse("a\n\"open"), InvalidArgument);
  EXPECT_EQ(csv::escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv::escape("plain"), "plain");
}

TEST(Schema, RejectsBadDeclarations) {
  EXPECT_THROW(Schema({{"a"}, {"a"}}), SchemaError);
  EXPECT_THROW(Schema({{"a", ColumnKind::numeric, ColumnRole::target}, {"b", ColumnKind::numeric, ColumnRole::target}}),
               SchemaError);
  EXPECT_THROW(Schema({{"a", ColumnKind::categorical, ColumnRole::feature, std::pair{0.0, 1.0}, std::nullopt}}),
               SchemaError);
}

TEST(Ingest, ScoredCsvByNameWithMissing) {
  const auto ds = parse_scored_csv(kCsv, scored_schema());
  ASSERT_EQ(ds.n_rows(), 3u);
  EXPECT_EQ(ds.frame().names(), (std::vector<std::string>{"x", "color"}));
  const auto &x = ds.frame().numeric("x");
  EXPECT_TRUE(x.is_missing(1));
  EXPECT_DOUBLE_EQ(x.values[2], 3.0);
  const auto &color = std::get<CategoricalColumn>(ds.frame().column("color"));
  EXPECT_EQ(color.label_at(1), "bl,ue");
  EXPECT_TRUE(color.is_missing(2));
  EXPECT_EQ(ds.y_pred()[1], 0.25);
  ASSERT_TRUE(ds.timestamps());
  EXPECT_EQ((*ds.timestamps())[0], "2024-01-02");
  EXPECT_EQ(residuals(ds).values[0], 0.5);
}

TEST(Ingest, Errors) {
  EXPECT_THROW(parse_scored_csv("x,y\n1,2\n", scored_schema()), MissingColumn);
  EXPECT_THROW(parse_scored_csv("ts,color,x,y,yhat\nt,a,oops,1,1\n", scored_schema()), TypeParseError);
  EXPECT_THROW(parse_scored_csv("ts,color,x,x,y,yhat\n", scored_schema()), DuplicateHeader);
  EXPECT_THROW(parse_scored_csv("ts,color,x,y,yhat\nt,a,1,NA,1\n", scored_schema()), Error);
}

TEST(Ingest, CustomMissingTokens) {
  const Schema s({{"x"}});
  const auto f = parse_frame_csv("x\n1\n?\n", s, {"?"});
  EXPECT_TRUE(f.numeric("x").is_missing(1));
  EXPECT_THROW(parse_frame_csv("x\n1\nNA\n", s, {"?"}), TypeParseError);
}

TEST(Ingest, RoundTripThroughCsv) {
  const auto ds = parse_scored_csv(kCsv, scored_schema());
  const auto text = to_csv(ds, scored_schema());
  const auto again = parse_scored_csv(text, scored_schema());
  EXPECT_EQ(to_csv(again, scored_schema()), text);
  EXPECT_EQ(again.y_true(), ds.y_true());
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(3.0), "3");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Frame, SelectAndMatrix) {
  const auto f = test::frame_of({{"a", {1, 2, 3}}, {"b", {4, 5, 6}}});
  const std::vector<std::size_t> rows{2, 0};
  const auto s = f.select_rows(rows);
  EXPECT_EQ(s.numeric("a").values, (std::vector<double>{3, 1}));
  const auto m = numeric_matrix(f);
  EXPECT_EQ(m(1, 1), 5.0);
  EXPECT_THROW(f.column("zz"), UnknownFeature);
}

TEST(Split, DeterministicPartition) {
  std::vector<double> v(103);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const auto ds = test::scored(test::frame_of({{"a", v}}), v, v);
  const auto a = split_dataset(ds, {{"train", 0.7}, {"test", 0.3}}, 42);
  const auto b = split_dataset(ds, {{"train", 0.7}, {"test", 0.3}}, 42);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].rows, b[0].rows);
  EXPECT_EQ(a[0].rows.size() + a[1].rows.size(), 103u);
  EXPECT_EQ(a[0].rows.size(), 73u);
  std::set<std::size_t> all(a[0].rows.begin(), a[0].rows.end());
  all.insert(a[1].rows.begin(), a[1].rows.end());
  EXPECT_EQ(all.size(), 103u);
  EXPECT_TRUE(std::is_sorted(a[1].rows.begin(), a[1].rows.end()));
  const auto c = split_dataset(ds, {{"train", 0.7}, {"test", 0.3}}, 43);
  EXPECT_NE(a[0].rows, c[0].rows);
}

TEST(Timestamps, Ordering) {
  EXPECT_EQ(timestamp_order({"10", "9", "11"}), (std::vector<std::size_t>{1, 0, 2}));
  EXPECT_EQ(timestamp_order({"2024-02-01", "2024-01-15"}), (std::vector<std::size_t>{1, 0}));
  EXPECT_FALSE(numeric_timestamps({"1", "x"}));
}
