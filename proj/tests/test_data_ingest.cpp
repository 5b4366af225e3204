#include "ensembleguard/data_ingest.hpp"
#include "ensembleguard/synthetic.hpp"

#include "support/files.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace ensembleguard;
using eg_test::TempDir;
using eg_test::write_file;

namespace {

std::string nsl_row(const std::string& label, std::size_t features = 41, const std::string& proto = "tcp") {
    std::string row = "0," + proto + ",http,SF";
    for (std::size_t j = 4; j < features; ++j) row += "," + std::to_string(j % 3);
    return row + "," + label + ",20\n";
}

std::string cic_file(const std::vector<std::string>& labels, const std::string& bytes_per_s = "12.5") {
    std::string s = " Destination Port, Flow Duration,Flow Bytes/s, Fwd Header Length, Fwd Header Length, Label\n";
    for (const auto& l : labels) s += "80,1000," + bytes_per_s + ",20,20," + l + "\n";
    return s;
}

std::string unsw_file(const std::vector<std::string>& cats) {
    std::string s = "id,dur,proto,service,state,spkts,attack_cat,label\n";
    int id = 1;
    for (const auto& c : cats) s += std::to_string(id++) + ",0.1,tcp,-,FIN,4," + c + "," + (c.empty() ? "0" : "1") + "\n";
    return s;
}

}  // namespace

TEST(Taxonomy, NslClassOrder) {
    const auto t = class_taxonomy(DatasetKind::NslKdd);
    EXPECT_EQ(t.classes.names, (std::vector<std::string>{"Normal", "DoS", "Probing", "Privilege", "AccessControl"}));
    EXPECT_EQ(t.classes.display[1], "DoS Attacks");
    EXPECT_EQ(t.classes.display[4], "Access Control Attacks");
}

TEST(Taxonomy, CicHasBenignPlusSix) {
    const auto t = class_taxonomy(DatasetKind::CicIds2017);
    EXPECT_EQ(t.classes.names,
              (std::vector<std::string>{"Benign", "DoS", "WebAttack", "Botnet", "PortScan", "BruteForce", "Infiltration"}));
    EXPECT_EQ(*t.map("PortScan"), "PortScan");
    EXPECT_EQ(*t.map("Web Attack \xe2\x80\x93 Brute Force"), "WebAttack");
    EXPECT_EQ(*t.map("BENIGN"), "Benign");
    EXPECT_EQ(*t.map("DDoS"), "DoS");
}

TEST(Taxonomy, UnswDocumentedCategories) {
    const auto t = class_taxonomy(DatasetKind::UnswNb15);
    EXPECT_EQ(t.classes.names.front(), "Normal");
    const std::set<std::string> names(t.classes.names.begin(), t.classes.names.end());
    for (const char* c : {"Generic", "Exploits", "Fuzzers", "DoS", "Reconnaissance", "Analysis", "Backdoor", "Shellcode", "Worms"}) {
        EXPECT_TRUE(names.count(c)) << c;
    }
    EXPECT_EQ(t.classes.size(), 10u);
    EXPECT_EQ(*t.map(" Backdoors "), "Backdoor");
}

TEST(Taxonomy, EmbeddedCopiesMatchDataFiles) {
    const std::filesystem::path dir = std::filesystem::path(EG_SOURCE_DIR) / "data" / "taxonomy";
    EXPECT_EQ(eg_test::slurp(dir / "nsl-kdd.txt"), taxonomy_data::kNslKdd);
    EXPECT_EQ(eg_test::slurp(dir / "unsw-nb15.txt"), taxonomy_data::kUnswNb15);
    EXPECT_EQ(eg_test::slurp(dir / "cic-ids-2017.txt"), taxonomy_data::kCicIds2017);
}

TEST(Taxonomy, LabelNormalization) {
    EXPECT_EQ(normalize_label("  Neptune. "), "neptune");
    const auto t = class_taxonomy(DatasetKind::NslKdd);
    EXPECT_EQ(*t.map("neptune"), "DoS");
    EXPECT_EQ(*t.map("guess_passwd"), "AccessControl");
    EXPECT_EQ(*t.map("buffer_overflow"), "Privilege");
    EXPECT_EQ(*t.map("portsweep"), "Probing");
    EXPECT_FALSE(t.map("not-an-attack").has_value());
}

TEST(Taxonomy, ParseErrors) {
    EXPECT_THROW(parse_taxonomy("@class A\n@class B\n"), ParseError);                 // no @dataset
    EXPECT_THROW(parse_taxonomy("@dataset nsl-kdd\n@class A\n"), ParseError);         // one class
    EXPECT_THROW(parse_taxonomy("@dataset nsl-kdd\n@class A\n@class B\nx = C\n"), ParseError);
    EXPECT_THROW(parse_taxonomy("@dataset nsl-kdd\n@class A\n@class B\nx = A\nx = B\n"), ParseError);
    EXPECT_THROW(parse_taxonomy("@dataset nsl-kdd\n@bogus\n"), ParseError);
}

TEST(NslKdd, TwoRowFixture) {
    TempDir tmp("nsl");
    const auto path = write_file(tmp / "two.txt", nsl_row("neptune") + nsl_row("normal"));
    const auto ds = parse_nslkdd(path, class_taxonomy(DatasetKind::NslKdd));
    EXPECT_EQ(ds.n(), 2u);
    EXPECT_EQ(ds.p(), 41u);
    EXPECT_EQ(ds.records[0].label, "DoS");
    EXPECT_EQ(ds.records[1].label, "Normal");
    EXPECT_EQ(ds.schema.features[1].kind, FeatureKind::Categorical);
    EXPECT_EQ(ds.schema.features[3].kind, FeatureKind::Categorical);
    EXPECT_EQ(ds.schema.features[4].kind, FeatureKind::Numeric);
    EXPECT_EQ(std::get<std::string>(ds.records[0].values[1]), "tcp");
    for (const auto& r : ds.records) EXPECT_EQ(r.values.size(), 41u);
}

TEST(NslKdd, DifficultyColumnOptional) {
    TempDir tmp("nsl");
    auto row = nsl_row("smurf");
    row = row.substr(0, row.rfind(',')) + "\n";
    const auto ds = parse_nslkdd(write_file(tmp / "a.txt", row), class_taxonomy(DatasetKind::NslKdd));
    EXPECT_EQ(ds.p(), 41u);
    EXPECT_EQ(ds.records[0].label, "DoS");
}

TEST(NslKdd, EmptyFileHasNoRecords) {
    TempDir tmp("nsl");
    const auto path = write_file(tmp / "empty.txt", "");
    try {
        parse_nslkdd(path, class_taxonomy(DatasetKind::NslKdd));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("no records"), std::string::npos);
    }
}

TEST(NslKdd, ShortRowNamesLine) {
    TempDir tmp("nsl");
    const auto path = write_file(tmp / "bad.txt", nsl_row("normal") + nsl_row("normal", 40));
    try {
        parse_nslkdd(path, class_taxonomy(DatasetKind::NslKdd));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.txt:2"), std::string::npos) << e.what();
    }
}

TEST(NslKdd, UnknownLabelsListed) {
    TempDir tmp("nsl");
    const auto path = write_file(tmp / "u.txt", nsl_row("zeroday") + nsl_row("normal") + nsl_row("alien"));
    try {
        parse_nslkdd(path, class_taxonomy(DatasetKind::NslKdd));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("zeroday"), std::string::npos);
        EXPECT_NE(msg.find("alien"), std::string::npos);
    }
}

TEST(NslKdd, WrongTaxonomyKindRejected) {
    TempDir tmp("nsl");
    const auto path = write_file(tmp / "a.txt", nsl_row("normal"));
    EXPECT_THROW(parse_nslkdd(path, class_taxonomy(DatasetKind::CicIds2017)), SchemaError);
}

TEST(NslKdd, MissingTokensBecomeMissing) {
    TempDir tmp("nsl");
    auto row = nsl_row("normal", 41, "?");
    const auto ds = parse_nslkdd(write_file(tmp / "a.txt", row), class_taxonomy(DatasetKind::NslKdd));
    EXPECT_TRUE(is_missing(ds.records[0].values[1]));
}

TEST(NslKdd, ParsingIsDeterministic) {
    TempDir tmp("nsl");
    synthetic::Options opt;
    opt.scale = 0.002;
    const auto path = synthetic::write_nslkdd(tmp / "s.txt", opt);
    const auto tax = class_taxonomy(DatasetKind::NslKdd);
    const auto a = parse_nslkdd(path, tax);
    const auto b = parse_nslkdd(path, tax);
    ASSERT_EQ(a.n(), b.n());
    for (std::size_t i = 0; i < a.n(); ++i) {
        EXPECT_EQ(a.records[i].values, b.records[i].values);
        EXPECT_EQ(a.records[i].label, b.records[i].label);
    }
}

TEST(CicIds, TwoFilesConcatenate) {
    TempDir tmp("cic");
    const auto a = write_file(tmp / "a.csv", cic_file({"BENIGN", "PortScan"}));
    const auto b = write_file(tmp / "b.csv", cic_file({"DDoS", "Web Attack \xe2\x80\x93 XSS"}));
    const auto ds = parse_cicids2017({a, b}, class_taxonomy(DatasetKind::CicIds2017));
    EXPECT_EQ(ds.n(), 4u);
    EXPECT_EQ(ds.records[1].label, "PortScan");
    EXPECT_EQ(ds.records[2].label, "DoS");
    EXPECT_EQ(ds.records[3].label, "WebAttack");
}

TEST(CicIds, HeaderTrimmedAndDuplicatesSuffixed) {
    TempDir tmp("cic");
    const auto ds = parse_cicids2017({write_file(tmp / "a.csv", cic_file({"BENIGN"}))}, class_taxonomy(DatasetKind::CicIds2017));
    ASSERT_EQ(ds.p(), 5u);
    EXPECT_EQ(ds.schema.features[0].name, "Destination Port");
    EXPECT_EQ(ds.schema.features[3].name, "Fwd Header Length");
    EXPECT_EQ(ds.schema.features[4].name, "Fwd Header Length.1");
    for (const auto& f : ds.schema.features) EXPECT_EQ(f.kind, FeatureKind::Numeric);
}

TEST(CicIds, InfinityAndNanBecomeMissing) {
    TempDir tmp("cic");
    const auto tax = class_taxonomy(DatasetKind::CicIds2017);
    const auto inf = parse_cicids2017({write_file(tmp / "a.csv", cic_file({"BENIGN"}, "Infinity"))}, tax);
    EXPECT_TRUE(is_missing(inf.records[0].values[2]));
    const auto nan = parse_cicids2017({write_file(tmp / "b.csv", cic_file({"BENIGN"}, "NaN"))}, tax);
    EXPECT_TRUE(is_missing(nan.records[0].values[2]));
}

TEST(CicIds, ConflictingHeadersRejected) {
    TempDir tmp("cic");
    const auto a = write_file(tmp / "a.csv", cic_file({"BENIGN"}));
    const auto b = write_file(tmp / "b.csv", "Other,Label\n1,BENIGN\n");
    EXPECT_THROW(parse_cicids2017({a, b}, class_taxonomy(DatasetKind::CicIds2017)), SchemaError);
}

TEST(CicIds, MissingLabelColumnRejected) {
    TempDir tmp("cic");
    const auto a = write_file(tmp / "a.csv", "A,B\n1,2\n");
    EXPECT_THROW(parse_cicids2017({a}, class_taxonomy(DatasetKind::CicIds2017)), SchemaError);
}

TEST(Unsw, ThreeRowFixture) {
    TempDir tmp("unsw");
    const auto ds = parse_unswnb15(write_file(tmp / "u.csv", unsw_file({"", "Exploits", "Backdoors"})),
                                   class_taxonomy(DatasetKind::UnswNb15));
    EXPECT_EQ(ds.n(), 3u);
    ASSERT_EQ(ds.p(), 5u);  // id, attack_cat and label dropped
    EXPECT_EQ(ds.schema.features[0].name, "dur");
    EXPECT_EQ(ds.schema.features[1].kind, FeatureKind::Categorical);
    EXPECT_EQ(ds.records[0].label, "Normal");
    EXPECT_EQ(ds.records[1].label, "Exploits");
    EXPECT_EQ(ds.records[2].label, "Backdoor");
}

TEST(Unsw, HeaderOnlyHasNoRecords) {
    TempDir tmp("unsw");
    try {
        parse_unswnb15(write_file(tmp / "u.csv", unsw_file({})), class_taxonomy(DatasetKind::UnswNb15));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("no records"), std::string::npos);
    }
}

TEST(Unsw, MissingAttackCatIsSchemaError) {
    TempDir tmp("unsw");
    EXPECT_THROW(parse_unswnb15(write_file(tmp / "u.csv", "id,dur,label\n1,0.1,0\n"), class_taxonomy(DatasetKind::UnswNb15)),
                 SchemaError);
}

TEST(ParseDataset, SingleFileKindsRejectSeveralFiles) {
    EXPECT_THROW(parse_dataset(DatasetKind::NslKdd, {"a", "b"}, class_taxonomy(DatasetKind::NslKdd)), UserError);
    EXPECT_THROW(parse_dataset(DatasetKind::NslKdd, {}, class_taxonomy(DatasetKind::NslKdd)), UserError);
}

TEST(DatasetKind, NamesRoundTrip) {
    for (auto k : {DatasetKind::NslKdd, DatasetKind::UnswNb15, DatasetKind::CicIds2017}) {
        EXPECT_EQ(parse_dataset_kind(to_string(k)), k);
    }
    EXPECT_THROW(parse_dataset_kind("kdd99"), UserError);
}
