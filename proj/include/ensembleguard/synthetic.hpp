#pragma once

// Synthetic traffic in the on-disk formats of the three datasets. Class
// proportions follow the public training files; each attack subtype has its
// own feature profile. A fixed share of records (overlap) is drawn from the
// profile of a different class while keeping its own label, so the data are
// not perfectly separable.

#include "ensembleguard/common.hpp"
#include "ensembleguard/rng.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

namespace ensembleguard::synthetic {

struct Options {
    std::uint64_t seed = 1;
    double scale = 1.0;     // row count multiplier
    double overlap = 0.02;  // share of records drawn from another class's profile
};

namespace detail {

inline std::string num(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
    auto s = text::fixed(v, 6);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

inline std::string rate(double v) { return text::fixed(std::clamp(v, 0.0, 1.0), 2); }

struct Draw {
    Rng& rng;
    double u(double lo, double hi) { return rng.uniform(lo, hi); }
    double i(long lo, long hi) { return static_cast<double>(lo + static_cast<long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)))); }
    double ln(double mu, double sd) { return std::round(std::exp(mu + sd * rng.normal())); }
    bool p(double prob) { return rng.bernoulli(prob); }
    template <typename T>
    const T& pick(const std::vector<T>& v) { return v[rng.below(v.size())]; }
    std::string pickw(const std::vector<std::pair<std::string, double>>& v) {
        std::vector<double> w;
        for (const auto& e : v) w.push_back(e.second);
        return v[rng.categorical(w)].first;
    }
};

/// One attack subtype: raw label, class index, record count at scale 1, row generator.
struct Subtype {
    std::string label;
    int cls;
    std::size_t count;
    std::function<std::vector<std::string>(Draw&)> gen;
};

/// Scaled counts (at least one record per subtype), shuffled with overlap applied.
inline std::vector<std::pair<const Subtype*, const Subtype*>> plan(const std::vector<Subtype>& subs, const Options& opt,
                                                                   Rng& rng) {
    std::vector<std::pair<const Subtype*, const Subtype*>> rows;  // (label source, feature source)
    std::vector<double> class_weight;
    for (const auto& s : subs) {
        if (static_cast<std::size_t>(s.cls) >= class_weight.size()) class_weight.resize(static_cast<std::size_t>(s.cls) + 1, 0.0);
        class_weight[static_cast<std::size_t>(s.cls)] += static_cast<double>(s.count);
    }
    for (const auto& s : subs) {
        const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(s.count) * opt.scale)));
        for (std::size_t k = 0; k < n; ++k) {
            const Subtype* src = &s;
            if (rng.bernoulli(opt.overlap)) {
                auto w = class_weight;
                w[static_cast<std::size_t>(s.cls)] = 0.0;
                const auto other = static_cast<int>(rng.categorical(w));
                std::vector<double> sw;
                for (const auto& t : subs) sw.push_back(t.cls == other ? static_cast<double>(t.count) : 0.0);
                src = &subs[rng.categorical(sw)];
            }
            rows.emplace_back(&s, src);
        }
    }
    rng.shuffle(rows);
    return rows;
}

inline void write_all(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw UserError("cannot write " + path.string());
    os << content;
}

// ---------------------------------------------------------------------------
// NSL-KDD

// Field order of one KDD record (41 features).
struct Kdd {
    double duration = 0;
    std::string protocol = "tcp", service = "http", flag = "SF";
    double src_bytes = 0, dst_bytes = 0, land = 0, wrong_fragment = 0, urgent = 0, hot = 0, num_failed_logins = 0;
    double logged_in = 0, num_compromised = 0, root_shell = 0, su_attempted = 0, num_root = 0, num_file_creations = 0;
    double num_shells = 0, num_access_files = 0, num_outbound_cmds = 0, is_host_login = 0, is_guest_login = 0;
    double count = 1, srv_count = 1, serror = 0, srv_serror = 0, rerror = 0, srv_rerror = 0, same_srv = 1, diff_srv = 0;
    double srv_diff_host = 0, dh_count = 1, dh_srv_count = 1, dh_same_srv = 1, dh_diff_srv = 0, dh_same_src_port = 0;
    double dh_srv_diff_host = 0, dh_serror = 0, dh_srv_serror = 0, dh_rerror = 0, dh_srv_rerror = 0;

    std::vector<std::string> cells() const {
        return {num(duration), protocol, service, flag, num(src_bytes), num(dst_bytes), num(land), num(wrong_fragment),
                num(urgent), num(hot), num(num_failed_logins), num(logged_in), num(num_compromised), num(root_shell),
                num(su_attempted), num(num_root), num(num_file_creations), num(num_shells), num(num_access_files),
                num(num_outbound_cmds), num(is_host_login), num(is_guest_login), num(count), num(srv_count), rate(serror),
                rate(srv_serror), rate(rerror), rate(srv_rerror), rate(same_srv), rate(diff_srv), rate(srv_diff_host),
                num(dh_count), num(dh_srv_count), rate(dh_same_srv), rate(dh_diff_srv), rate(dh_same_src_port),
                rate(dh_srv_diff_host), rate(dh_serror), rate(dh_srv_serror), rate(dh_rerror), rate(dh_srv_rerror)};
    }
};

inline Kdd kdd_normal(Draw& d) {
    Kdd r;
    const auto proto = d.pickw({{"tcp", 0.8}, {"udp", 0.15}, {"icmp", 0.05}});
    r.protocol = proto;
    if (proto == "tcp") {
        r.service = d.pickw({{"http", 0.55}, {"smtp", 0.12}, {"ftp_data", 0.1}, {"ftp", 0.04}, {"telnet", 0.03}, {"private", 0.06},
                             {"pop_3", 0.03}, {"domain", 0.02}, {"other", 0.05}});
        r.logged_in = d.p(0.92) ? 1 : 0;
        r.flag = d.pickw({{"SF", 0.95}, {"REJ", 0.02}, {"S0", 0.01}, {"RSTO", 0.01}, {"S1", 0.01}});
    } else if (proto == "udp") {
        r.service = d.pickw({{"domain_u", 0.6}, {"private", 0.3}, {"ntp_u", 0.1}});
    } else {
        r.service = d.pickw({{"eco_i", 0.5}, {"ecr_i", 0.3}, {"urp_i", 0.2}});
    }
    r.duration = d.p(0.85) ? 0 : d.ln(3.0, 2.0);
    r.src_bytes = d.ln(5.5, 1.2);
    r.dst_bytes = r.service == "http" ? d.ln(7.5, 1.3) : d.p(0.5) ? 0 : d.ln(6.0, 2.0);
    if (d.p(0.05)) r.hot = d.i(1, 3);
    if (r.service == "ftp" || r.service == "ftp_data") r.is_guest_login = d.p(0.03) ? 1 : 0;
    r.count = d.i(1, 20);
    r.srv_count = d.i(1, 25);
    if (d.p(0.03)) r.rerror = r.srv_rerror = d.u(0.0, 1.0);
    r.same_srv = d.u(0.8, 1.0);
    r.diff_srv = d.u(0.0, 0.1);
    r.srv_diff_host = d.u(0.0, 0.3);
    r.dh_count = d.i(1, 255);
    r.dh_srv_count = d.i(50, 255);
    r.dh_same_srv = d.u(0.5, 1.0);
    r.dh_diff_srv = d.u(0.0, 0.1);
    r.dh_same_src_port = d.u(0.0, 0.2);
    r.dh_srv_diff_host = d.u(0.0, 0.1);
    r.dh_serror = d.u(0.0, 0.05);
    r.dh_srv_serror = d.u(0.0, 0.02);
    r.dh_rerror = d.u(0.0, 0.1);
    r.dh_srv_rerror = d.u(0.0, 0.05);
    return r;
}

inline Kdd kdd_session(Draw& d, const std::vector<std::string>& services) {
    Kdd r;
    r.service = d.pick(services);
    r.logged_in = 1;
    r.duration = d.ln(4.0, 1.5);
    r.src_bytes = d.ln(6.5, 1.2);
    r.dst_bytes = d.ln(7.5, 1.5);
    r.count = d.i(1, 5);
    r.srv_count = d.i(1, 5);
    r.dh_count = d.i(1, 60);
    r.dh_srv_count = d.i(1, 30);
    r.dh_same_srv = d.u(0.2, 1.0);
    r.dh_diff_srv = d.u(0.0, 0.2);
    r.dh_same_src_port = d.u(0.0, 0.5);
    r.dh_srv_diff_host = d.u(0.0, 0.2);
    return r;
}

inline std::vector<Subtype> nslkdd_subtypes() {
    auto row = [](auto f) { return [f](Draw& d) { return f(d).cells(); }; };
    std::vector<Subtype> s;
    s.push_back({"normal", 0, 67343, row(kdd_normal)});
    // denial of service
    s.push_back({"neptune", 1, 41214, row([](Draw& d) {
                     Kdd r;
                     r.service = d.pick(std::vector<std::string>{"private", "private", "http", "telnet", "ftp_data", "other", "finger"});
                     r.flag = d.p(0.9) ? "S0" : "REJ";
                     r.count = d.i(100, 511);
                     r.srv_count = d.i(1, 30);
                     const bool s0 = r.flag == "S0";
                     r.serror = r.srv_serror = s0 ? d.u(0.95, 1.0) : 0.0;
                     r.rerror = r.srv_rerror = s0 ? 0.0 : d.u(0.95, 1.0);
                     r.same_srv = d.u(0.0, 0.1);
                     r.diff_srv = d.u(0.05, 0.1);
                     r.dh_count = 255;
                     r.dh_srv_count = d.i(1, 30);
                     r.dh_same_srv = d.u(0.0, 0.1);
                     r.dh_diff_srv = d.u(0.05, 0.1);
                     r.dh_serror = r.dh_srv_serror = s0 ? d.u(0.95, 1.0) : 0.0;
                     r.dh_rerror = r.dh_srv_rerror = s0 ? 0.0 : d.u(0.95, 1.0);
                     return r;
                 })});
    s.push_back({"smurf", 1, 2646, row([](Draw& d) {
                     Kdd r;
                     r.protocol = "icmp";
                     r.service = "ecr_i";
                     r.src_bytes = d.p(0.8) ? 1032 : 520;
                     r.count = d.i(300, 511);
                     r.srv_count = r.count;
                     r.dh_count = 255;
                     r.dh_srv_count = 255;
                     r.dh_same_src_port = d.u(0.9, 1.0);
                     return r;
                 })});
    s.push_back({"back", 1, 956, row([](Draw& d) {
                     Kdd r;
                     r.src_bytes = 54540;
                     r.dst_bytes = d.ln(8.9, 0.2);
                     r.hot = 2;
                     r.logged_in = 1;
                     r.num_compromised = d.p(0.5) ? 1 : 0;
                     r.count = d.i(1, 10);
                     r.srv_count = d.i(1, 10);
                     r.dh_count = d.i(50, 255);
                     r.dh_srv_count = d.i(50, 255);
                     r.dh_same_srv = 1.0;
                     return r;
                 })});
    s.push_back({"teardrop", 1, 892, row([](Draw& d) {
                     Kdd r;
                     r.protocol = "udp";
                     r.service = "private";
                     r.src_bytes = 28;
                     r.wrong_fragment = 3;
                     r.count = d.i(1, 100);
                     r.srv_count = r.count;
                     r.dh_count = d.i(50, 255);
                     r.dh_srv_count = d.i(1, 100);
                     r.dh_same_src_port = d.u(0.3, 1.0);
                     return r;
                 })});
    s.push_back({"pod", 1, 201, row([](Draw& d) {
                     Kdd r;
                     r.protocol = "icmp";
                     r.service = "ecr_i";
                     r.src_bytes = 1480;
                     r.wrong_fragment = 1;
                     r.count = d.i(1, 5);
                     r.srv_count = r.count;
                     r.dh_count = d.i(1, 255);
                     r.dh_srv_count = d.i(1, 50);
                     return r;
                 })});
    s.push_back({"land", 1, 18, row([](Draw& d) {
                     Kdd r;
                     r.service = d.pick(std::vector<std::string>{"finger", "telnet", "http", "private"});
                     r.flag = "S0";
                     r.land = 1;
                     r.serror = r.srv_serror = 1.0;
                     r.dh_count = d.i(1, 100);
                     r.dh_srv_count = d.i(1, 10);
                     r.dh_serror = r.dh_srv_serror = d.u(0.5, 1.0);
                     r.dh_same_src_port = 1.0;
                     return r;
                 })});
    // probing
    s.push_back({"satan", 2, 3633, row([](Draw& d) {
                     Kdd r;
                     r.service = d.pick(std::vector<std::string>{"private", "other", "telnet", "ftp", "smtp", "finger", "http"});
                     r.flag = d.pickw({{"REJ", 0.5}, {"S0", 0.2}, {"SF", 0.2}, {"RSTR", 0.1}});
                     r.count = d.i(1, 400);
                     r.srv_count = d.i(1, 5);
                     r.rerror = r.srv_rerror = d.u(0.5, 1.0);
                     r.same_srv = d.u(0.0, 0.2);
                     r.diff_srv = d.u(0.5, 1.0);
                     r.dh_count = 255;
                     r.dh_srv_count = d.i(1, 20);
                     r.dh_same_srv = d.u(0.0, 0.1);
                     r.dh_diff_srv = d.u(0.5, 1.0);
                     r.dh_rerror = r.dh_srv_rerror = d.u(0.5, 1.0);
                     return r;
                 })});
    s.push_back({"ipsweep", 2, 3599, row([](Draw& d) {
                     Kdd r;
                     r.protocol = "icmp";
                     r.service = d.p(0.9) ? "eco_i" : "ecr_i";
                     r.src_bytes = d.p(0.7) ? 8 : 18;
                     r.count = d.i(1, 5);
                     r.srv_count = d.i(1, 40);
                     r.srv_diff_host = d.u(0.5, 1.0);
                     r.dh_count = d.i(1, 100);
                     r.dh_srv_count = d.i(1, 100);
                     r.dh_same_src_port = d.u(0.8, 1.0);
                     r.dh_srv_diff_host = d.u(0.3, 1.0);
                     return r;
                 })});
    s.push_back({"portsweep", 2, 2931, row([](Draw& d) {
                     Kdd r;
                     r.service = "private";
                     r.flag = d.p(0.7) ? "REJ" : "RSTR";
                     r.duration = d.p(0.8) ? 0 : d.ln(8.0, 2.0);
                     r.count = d.i(1, 5);
                     r.srv_count = d.i(1, 5);
                     r.rerror = r.srv_rerror = d.u(0.8, 1.0);
                     r.srv_diff_host = d.u(0.0, 1.0);
                     r.dh_count = d.i(1, 255);
                     r.dh_srv_count = d.i(1, 10);
                     r.dh_same_srv = d.u(0.0, 0.3);
                     r.dh_diff_srv = d.u(0.0, 0.5);
                     r.dh_same_src_port = d.u(0.8, 1.0);
                     r.dh_srv_rerror = d.u(0.8, 1.0);
                     r.dh_rerror = d.u(0.3, 1.0);
                     return r;
                 })});
    s.push_back({"nmap", 2, 1493, row([](Draw& d) {
                     Kdd r;
                     r.protocol = d.pickw({{"tcp", 0.5}, {"udp", 0.2}, {"icmp", 0.3}});
                     r.service = r.protocol == "icmp" ? "eco_i" : "private";
                     r.flag = r.protocol == "tcp" ? (d.p(0.6) ? "S0" : "SF") : "SF";
                     r.src_bytes = d.i(0, 20);
                     r.count = d.i(1, 10);
                     r.srv_count = d.i(1, 10);
                     r.serror = r.srv_serror = r.flag == "S0" ? d.u(0.5, 1.0) : 0.0;
                     r.dh_count = d.i(1, 50);
                     r.dh_srv_count = d.i(1, 20);
                     r.dh_diff_srv = d.u(0.3, 1.0);
                     r.dh_same_src_port = d.u(0.3, 1.0);
                     r.dh_srv_diff_host = d.u(0.0, 0.5);
                     return r;
                 })});
    // privilege escalation (user to root)
    s.push_back({"buffer_overflow", 3, 30, row([](Draw& d) {
                     auto r = kdd_session(d, {"telnet", "telnet", "ftp_data"});
                     r.hot = d.i(1, 5);
                     r.root_shell = d.p(0.8) ? 1 : 0;
                     r.num_file_creations = d.i(0, 3);
                     r.num_shells = d.i(0, 1);
                     r.num_compromised = d.i(0, 3);
                     r.num_root = d.i(0, 4);
                     return r;
                 })});
    s.push_back({"rootkit", 3, 10, row([](Draw& d) {
                     auto r = kdd_session(d, {"telnet", "ftp_data", "http"});
                     r.hot = d.i(0, 3);
                     r.root_shell = d.p(0.5) ? 1 : 0;
                     r.num_root = d.i(1, 5);
                     r.num_file_creations = d.i(1, 3);
                     return r;
                 })});
    s.push_back({"loadmodule", 3, 9, row([](Draw& d) {
                     auto r = kdd_session(d, {"telnet", "ftp_data"});
                     r.hot = d.i(1, 3);
                     r.root_shell = d.p(0.6) ? 1 : 0;
                     r.num_file_creations = 1;
                     r.num_shells = d.i(0, 1);
                     return r;
                 })});
    s.push_back({"perl", 3, 3, row([](Draw& d) {
                     auto r = kdd_session(d, {"telnet"});
                     r.hot = d.i(1, 2);
                     r.root_shell = 1;
                     r.num_root = d.i(1, 3);
                     return r;
                 })});
    // access control (remote to local)
    s.push_back({"warezclient", 4, 890, row([](Draw& d) {
                     auto r = kdd_session(d, {"ftp_data", "ftp_data", "ftp"});
                     r.duration = d.ln(6.0, 1.5);
                     r.src_bytes = d.ln(9.0, 1.5);
                     r.dst_bytes = 0;
                     r.hot = d.i(0, 28);
                     r.is_guest_login = d.p(0.8) ? 1 : 0;
                     return r;
                 })});
    s.push_back({"guess_passwd", 4, 53, row([](Draw& d) {
                     Kdd r;
                     r.service = "telnet";
                     r.flag = d.p(0.7) ? "RSTO" : "SF";
                     r.src_bytes = d.i(104, 130);
                     r.dst_bytes = d.i(170, 190);
                     r.num_failed_logins = 1;
                     r.duration = d.i(0, 5);
                     r.dh_count = d.i(1, 255);
                     r.dh_srv_count = d.i(1, 255);
                     r.dh_rerror = r.dh_srv_rerror = d.u(0.0, 0.6);
                     return r;
                 })});
    s.push_back({"warezmaster", 4, 20, row([](Draw& d) {
                     auto r = kdd_session(d, {"ftp"});
                     r.duration = d.ln(8.0, 1.0);
                     r.dst_bytes = d.ln(13.0, 1.0);
                     r.hot = d.i(20, 30);
                     r.is_guest_login = 1;
                     return r;
                 })});
    s.push_back({"imap", 4, 11, row([](Draw& d) {
                     Kdd r;
                     r.service = "imap4";
                     r.flag = d.p(0.6) ? "S0" : "SF";
                     r.src_bytes = d.ln(7.3, 0.3);
                     r.count = d.i(1, 10);
                     r.dh_count = d.i(1, 20);
                     r.dh_srv_count = d.i(1, 20);
                     r.serror = r.flag == "S0" ? 1.0 : 0.0;
                     return r;
                 })});
    s.push_back({"ftp_write", 4, 8, row([](Draw& d) {
                     auto r = kdd_session(d, {"ftp", "ftp_data", "login"});
                     r.hot = 1;
                     r.num_file_creations = d.i(1, 5);
                     r.num_access_files = d.i(0, 1);
                     return r;
                 })});
    s.push_back({"multihop", 4, 7, row([](Draw& d) {
                     auto r = kdd_session(d, {"telnet", "ftp_data"});
                     r.duration = d.ln(6.5, 1.0);
                     r.hot = d.i(1, 4);
                     r.num_file_creations = d.i(0, 2);
                     r.num_compromised = d.i(0, 2);
                     return r;
                 })});
    s.push_back({"phf", 4, 4, row([](Draw& d) {
                     auto r = kdd_session(d, {"http"});
                     r.duration = d.i(0, 5);
                     r.src_bytes = d.i(45, 60);
                     r.dst_bytes = d.ln(7.0, 0.5);
                     r.hot = 1;
                     r.num_access_files = 1;
                     return r;
                 })});
    s.push_back({"spy", 4, 2, row([](Draw& d) {
                     auto r = kdd_session(d, {"telnet"});
                     r.duration = d.ln(9.5, 0.3);
                     r.num_file_creations = d.i(1, 3);
                     r.num_access_files = d.i(0, 1);
                     r.hot = d.i(0, 2);
                     return r;
                 })});
    return s;
}

// ---------------------------------------------------------------------------
// CIC-IDS-2017

inline const std::vector<std::string>& cic_header() {
    static const std::vector<std::string> h{
        " Destination Port", " Flow Duration", " Total Fwd Packets", " Total Backward Packets", "Total Length of Fwd Packets",
        " Total Length of Bwd Packets", " Fwd Packet Length Max", " Fwd Packet Length Min", " Fwd Packet Length Mean",
        " Fwd Packet Length Std", "Bwd Packet Length Max", " Bwd Packet Length Min", " Bwd Packet Length Mean",
        " Bwd Packet Length Std", "Flow Bytes/s", " Flow Packets/s", " Flow IAT Mean", " Flow IAT Std", " Flow IAT Max",
        " Flow IAT Min", "Fwd IAT Total", " Fwd IAT Mean", " Fwd IAT Std", " Fwd IAT Max", " Fwd IAT Min", "Bwd IAT Total",
        " Bwd IAT Mean", " Bwd IAT Std", " Bwd IAT Max", " Bwd IAT Min", "Fwd PSH Flags", " Bwd PSH Flags", " Fwd URG Flags",
        " Bwd URG Flags", " Fwd Header Length", " Bwd Header Length", "Fwd Packets/s", " Bwd Packets/s", " Min Packet Length",
        " Max Packet Length", " Packet Length Mean", " Packet Length Std", " Packet Length Variance", "FIN Flag Count",
        " SYN Flag Count", " RST Flag Count", " PSH Flag Count", " ACK Flag Count", " URG Flag Count", " CWE Flag Count",
        " ECE Flag Count", " Down/Up Ratio", " Average Packet Size", " Avg Fwd Segment Size", " Avg Bwd Segment Size",
        " Fwd Header Length", "Fwd Avg Bytes/Bulk", " Fwd Avg Packets/Bulk", " Fwd Avg Bulk Rate", " Bwd Avg Bytes/Bulk",
        " Bwd Avg Packets/Bulk", "Bwd Avg Bulk Rate", "Subflow Fwd Packets", " Subflow Fwd Bytes", " Subflow Bwd Packets",
        " Subflow Bwd Bytes", "Init_Win_bytes_forward", " Init_Win_bytes_backward", " act_data_pkt_fwd",
        " min_seg_size_forward", "Active Mean", " Active Std", " Active Max", " Active Min", "Idle Mean", " Idle Std",
        " Idle Max", " Idle Min", " Label"};
    return h;
}

/// Latent description of one flow; the 78 columns are derived from it.
struct Flow {
    double port = 80, duration = 1000;
    double fwd = 2, bwd = 1;
    double fwd_len = 100, fwd_sd = 10, bwd_len = 100, bwd_sd = 10;
    double iat_scale = 1.0;
    double syn = 0, fin = 0, rst = 0, psh = 0, ack = 1, urg = 0;
    double win_fwd = 8192, win_bwd = 8192;
    double active = 0, idle = 0;

    std::vector<std::string> cells(Draw& d) const {
        const double nf = std::max(1.0, fwd), nb = std::max(0.0, bwd);
        const double fmean = std::max(0.0, fwd_len), bmean = nb > 0 ? std::max(0.0, bwd_len) : 0.0;
        const double fmax = fmean + fwd_sd * d.u(0.5, 2.0), fmin = std::max(0.0, fmean - fwd_sd * d.u(0.5, 2.0));
        const double bmax = nb > 0 ? bmean + bwd_sd * d.u(0.5, 2.0) : 0.0;
        const double bmin = nb > 0 ? std::max(0.0, bmean - bwd_sd * d.u(0.5, 2.0)) : 0.0;
        const double tf = std::round(fmean * nf), tb = std::round(bmean * nb);
        const double pk = nf + nb;
        const double dur = std::max(0.0, duration);
        const double secs = dur / 1e6;
        std::string bytes_s, pkts_s;
        if (dur == 0.0) {
            bytes_s = d.p(0.5) ? "Infinity" : "NaN";
            pkts_s = "Infinity";
        } else {
            bytes_s = num((tf + tb) / secs);
            pkts_s = num(pk / secs);
        }
        const double iat = pk > 1 ? dur / (pk - 1) : 0.0;
        const double iat_sd = iat * 0.5 * iat_scale;
        const double fiat = nf > 1 ? dur / (nf - 1) : 0.0;
        const double biat = nb > 1 ? dur / (nb - 1) : 0.0;
        const double lmin = std::min(fmin, nb > 0 ? bmin : fmin), lmax = std::max(fmax, bmax);
        const double lmean = pk > 0 ? (tf + tb) / pk : 0.0;
        const double lsd = (fwd_sd + bwd_sd) / 2.0;
        const double hf = 20.0 * nf + 12.0 * std::floor(nf / 2.0), hb = 20.0 * nb;
        auto n = [](double v) { return num(std::round(v)); };
        return {n(port), n(dur), n(nf), n(nb), n(tf), n(tb), n(fmax), n(fmin), num(fmean), num(fwd_sd), n(bmax), n(bmin),
                num(bmean), num(nb > 0 ? bwd_sd : 0.0), bytes_s, pkts_s, num(iat), num(iat_sd), n(iat + 2 * iat_sd),
                n(std::max(0.0, iat - iat_sd)), n(nf > 1 ? dur : 0.0), num(fiat), num(fiat * 0.4), n(fiat * 1.8),
                n(fiat * 0.2), n(nb > 1 ? dur : 0.0), num(biat), num(biat * 0.4), n(biat * 1.8), n(biat * 0.2), n(psh),
                "0", n(urg), "0", n(hf), n(hb), num(secs > 0 ? nf / secs : 0.0), num(secs > 0 ? nb / secs : 0.0), n(lmin),
                n(lmax), num(lmean), num(lsd), num(lsd * lsd), n(fin), n(syn), n(rst), n(psh), n(ack), n(urg), "0", n(rst),
                n(nf > 0 ? std::floor(nb / nf) : 0.0), num(pk > 0 ? (tf + tb) / pk * (pk + 1) / std::max(pk, 1.0) : 0.0),
                num(fmean), num(bmean), n(hf), "0", "0", "0", "0", "0", "0", n(nf), n(tf), n(nb), n(tb), n(win_fwd),
                n(win_bwd), n(std::max(0.0, nf - 1)), n(nf > 0 ? 20 : 0), n(active), n(active * 0.1), n(active * 1.2),
                n(active * 0.8), n(idle), n(idle * 0.1), n(idle * 1.2), n(idle * 0.8)};
    }
};

inline Flow cic_benign(Draw& d) {
    Flow f;
    f.port = d.pickw({{"443", 0.35}, {"80", 0.25}, {"53", 0.2}, {"22", 0.02}, {"21", 0.01}, {"8080", 0.02}, {"high", 0.15}}) == "high"
                 ? d.i(1024, 65535)
                 : 0;
    if (f.port == 0) f.port = d.pick(std::vector<double>{443, 443, 80, 53, 53, 123, 137, 8080});
    f.duration = d.p(0.02) ? 0 : d.ln(11.0, 3.0);
    f.fwd = std::max(1.0, d.ln(1.5, 1.0));
    f.bwd = std::max(0.0, d.ln(1.5, 1.1));
    f.fwd_len = d.ln(4.0, 1.2);
    f.fwd_sd = f.fwd_len * d.u(0.0, 0.8);
    f.bwd_len = d.ln(5.0, 1.5);
    f.bwd_sd = f.bwd_len * d.u(0.0, 0.8);
    f.ack = d.p(0.6) ? 1 : 0;
    f.psh = d.p(0.3) ? 1 : 0;
    f.win_fwd = d.pick(std::vector<double>{-1, 8192, 29200, 65535, 251, 1024});
    f.win_bwd = d.pick(std::vector<double>{-1, 0, 8192, 29200, 65535, 229});
    f.idle = d.p(0.1) ? d.ln(16.0, 1.0) : 0;
    f.active = d.p(0.1) ? d.ln(10.0, 1.5) : 0;
    return f;
}

inline std::vector<Subtype> cicids2017_subtypes() {
    auto row = [](auto f) { return [f](Draw& d) { return f(d).cells(d); }; };
    std::vector<Subtype> s;
    s.push_back({"BENIGN", 0, 8520, row(cic_benign)});
    s.push_back({"DoS Hulk", 1, 900, row([](Draw& d) {
                     Flow f;
                     f.duration = d.ln(11.0, 1.5);
                     f.fwd = d.i(3, 8);
                     f.bwd = d.p(0.5) ? 0 : d.i(4, 8);
                     f.fwd_len = d.ln(5.8, 0.3);
                     f.fwd_sd = d.u(100, 200);
                     f.bwd_len = d.ln(7.5, 0.5);
                     f.bwd_sd = d.u(1000, 3000);
                     f.psh = 1;
                     f.win_fwd = d.pick(std::vector<double>{29200, 251, 256});
                     f.win_bwd = d.pick(std::vector<double>{235, -1});
                     return f;
                 })});
    s.push_back({"DDoS", 1, 600, row([](Draw& d) {
                     Flow f;
                     f.duration = d.ln(13.5, 1.5);
                     f.fwd = d.i(3, 6);
                     f.bwd = d.i(3, 6);
                     f.fwd_len = d.u(5, 8);
                     f.fwd_sd = d.u(0, 10);
                     f.bwd_len = d.ln(7.8, 0.2);
                     f.bwd_sd = d.u(2000, 4000);
                     f.win_fwd = 256;
                     f.win_bwd = 229;
                     return f;
                 })});
    s.push_back({"DoS GoldenEye", 1, 200, row([](Draw& d) {
                     Flow f;
                     f.duration = d.ln(15.5, 0.8);
                     f.fwd = d.i(6, 10);
                     f.bwd = d.i(4, 8);
                     f.fwd_len = d.ln(5.5, 0.3);
                     f.fwd_sd = d.u(150, 300);
                     f.bwd_len = d.ln(7.0, 0.5);
                     f.bwd_sd = d.u(1000, 2000);
                     f.idle = d.ln(15.5, 0.5);
                     f.win_fwd = 29200;
                     f.win_bwd = 235;
                     return f;
                 })});
    s.push_back({"DoS slowloris", 1, 120, row([](Draw& d) {
                     Flow f;
                     f.duration = d.ln(17.5, 0.5);
                     f.fwd = d.i(5, 10);
                     f.bwd = d.i(1, 3);
                     f.fwd_len = d.u(20, 60);
                     f.fwd_sd = d.u(10, 40);
                     f.bwd_len = 0;
                     f.bwd_sd = 0;
                     f.idle = d.ln(16.0, 0.3);
                     f.win_fwd = 29200;
                     f.win_bwd = 28960;
                     return f;
                 })});
    s.push_back({"DoS Slowhttptest", 1, 115, row([](Draw& d) {
                     Flow f;
                     f.duration = d.ln(17.0, 0.8);
                     f.fwd = d.i(2, 6);
                     f.bwd = d.i(0, 2);
                     f.fwd_len = d.u(0, 30);
                     f.fwd_sd = d.u(0, 20);
                     f.bwd_len = 0;
                     f.bwd_sd = 0;
                     f.idle = d.ln(16.5, 0.3);
                     f.win_fwd = 29200;
                     f.win_bwd = d.p(0.5) ? 28960 : 0;
                     return f;
                 })});
    s.push_back({"Web Attack - Brute Force", 2, 40, row([](Draw& d) {
                     Flow f;
                     f.duration = d.ln(15.3, 0.4);
                     f.fwd = d.i(3, 20);
                     f.bwd = d.i(1, 20);
                     f.fwd_len = d.ln(3.5, 0.5);
                     f.fwd_sd = d.u(20, 100);
                     f.bwd_len = d.ln(5.0, 0.5);
                     f.bwd_sd = d.u(50, 300);
                     f.psh = 1;
                     f.win_fwd = 29200;
                     f.win_bwd = 235;
                     return f;
                 })});
    s.push_back({"Web Attack \xe2\x80\x93 XSS", 2, 22, row([](Draw& d) {
                     Flow f;
                     f.duration = d.ln(15.5, 0.4);
                     f.fwd = d.i(3, 20);
                     f.bwd = d.i(1, 20);
                     f.fwd_len = d.ln(4.5, 0.5);
                     f.fwd_sd = d.u(50, 200);
                     f.bwd_len = d.ln(5.5, 0.5);
                     f.bwd_sd = d.u(50, 300);
                     f.psh = 1;
                     f.win_fwd = 29200;
                     f.win_bwd = 235;
                     return f;
                 })});
    s.push_back({"Web Attack - Sql Injection", 2, 8, row([](Draw& d) {
                     Flow f;
                     f.duration = d.ln(15.0, 0.5);
                     f.fwd = d.i(3, 8);
                     f.bwd = d.i(1, 6);
                     f.fwd_len = d.ln(4.8, 0.4);
                     f.fwd_sd = d.u(50, 200);
                     f.bwd_len = d.ln(5.8, 0.4);
                     f.bwd_sd = d.u(50, 300);
                     f.psh = 1;
                     f.win_fwd = 29200;
                     f.win_bwd = 235;
                     return f;
                 })});
    s.push_back({"Bot", 3, 3060, row([](Draw& d) {
                     Flow f;
                     f.port = d.p(0.8) ? 8080 : d.i(1024, 65535);
                     f.duration = d.ln(11.5, 2.0);
                     f.fwd = d.i(2, 6);
                     f.bwd = d.i(1, 4);
                     f.fwd_len = d.u(100, 220);
                     f.fwd_sd = d.u(50, 120);
                     f.bwd_len = d.u(60, 140);
                     f.bwd_sd = d.u(30, 90);
                     f.psh = d.p(0.7) ? 1 : 0;
                     f.win_fwd = 8192;
                     f.win_bwd = d.pick(std::vector<double>{237, 2053, -1});
                     return f;
                 })});
    s.push_back({"PortScan", 4, 40, row([](Draw& d) {
                     Flow f;
                     f.port = d.i(1, 65535);
                     f.duration = d.ln(3.5, 1.0);
                     f.fwd = 1;
                     f.bwd = 1;
                     f.fwd_len = d.p(0.8) ? 0 : 2;
                     f.fwd_sd = 0;
                     f.bwd_len = d.p(0.8) ? 6 : 0;
                     f.bwd_sd = 0;
                     f.syn = 1;
                     f.rst = d.p(0.5) ? 1 : 0;
                     f.ack = 0;
                     f.win_fwd = d.pick(std::vector<double>{1024, 29200, 2048});
                     f.win_bwd = 0;
                     return f;
                 })});
    s.push_back({"FTP-Patator", 5, 600, row([](Draw& d) {
                     Flow f;
                     f.port = 21;
                     f.duration = d.ln(15.0, 0.7);
                     f.fwd = d.i(6, 20);
                     f.bwd = d.i(8, 25);
                     f.fwd_len = d.u(5, 15);
                     f.fwd_sd = d.u(5, 10);
                     f.bwd_len = d.u(15, 40);
                     f.bwd_sd = d.u(10, 25);
                     f.psh = 1;
                     f.win_fwd = 29200;
                     f.win_bwd = 227;
                     return f;
                 })});
    s.push_back({"SSH-Patator", 5, 555, row([](Draw& d) {
                     Flow f;
                     f.port = 22;
                     f.duration = d.ln(15.5, 0.6);
                     f.fwd = d.i(15, 35);
                     f.bwd = d.i(20, 40);
                     f.fwd_len = d.u(40, 80);
                     f.fwd_sd = d.u(40, 100);
                     f.bwd_len = d.u(60, 120);
                     f.bwd_sd = d.u(80, 200);
                     f.psh = 1;
                     f.win_fwd = 29200;
                     f.win_bwd = 247;
                     return f;
                 })});
    s.push_back({"Infiltration", 6, 2260, row([](Draw& d) {
                     Flow f;
                     f.port = d.p(0.6) ? 444 : d.i(1, 1023);
                     f.duration = d.ln(16.5, 1.5);
                     f.fwd = std::max(1.0, d.ln(2.5, 1.2));
                     f.bwd = std::max(1.0, d.ln(2.5, 1.2));
                     f.fwd_len = d.ln(5.0, 1.0);
                     f.fwd_sd = f.fwd_len * d.u(0.3, 1.5);
                     f.bwd_len = d.ln(6.0, 1.0);
                     f.bwd_sd = f.bwd_len * d.u(0.3, 1.5);
                     f.psh = d.p(0.5) ? 1 : 0;
                     f.win_fwd = d.pick(std::vector<double>{8192, 65535});
                     f.win_bwd = d.pick(std::vector<double>{-1, 64240});
                     f.active = d.ln(11.0, 1.0);
                     f.idle = d.ln(17.0, 0.8);
                     return f;
                 })});
    return s;
}

// ---------------------------------------------------------------------------
// UNSW-NB15

inline const std::vector<std::string>& unsw_header() {
    static const std::vector<std::string> h{
        "id", "dur", "proto", "service", "state", "spkts", "dpkts", "sbytes", "dbytes", "rate", "sttl", "dttl", "sload",
        "dload", "sloss", "dloss", "sinpkt", "dinpkt", "sjit", "djit", "swin", "stcpb", "dtcpb", "dwin", "tcprtt", "synack",
        "ackdat", "smean", "dmean", "trans_depth", "response_body_len", "ct_srv_src", "ct_state_ttl", "ct_dst_ltm",
        "ct_src_dport_ltm", "ct_dst_sport_ltm", "ct_dst_src_ltm", "is_ftp_login", "ct_ftp_cmd", "ct_flw_http_mthd",
        "ct_src_ltm", "ct_srv_dst", "is_sm_ips_ports", "attack_cat", "label"};
    return h;
}

struct UnswProfile {
    std::vector<std::pair<std::string, double>> proto, service, state;
    double spkts_mu, dpkts_mu, sbytes_mu, dbytes_mu, dur_mu;
    double sttl, dttl;
    double ct_lo, ct_hi;
};

inline std::vector<std::string> unsw_row(Draw& d, const UnswProfile& p) {
    const auto proto = d.pickw(p.proto);
    const auto service = d.pickw(p.service);
    const auto state = d.pickw(p.state);
    const double spkts = std::max(1.0, d.ln(p.spkts_mu, 0.6));
    const double dpkts = std::max(0.0, d.ln(p.dpkts_mu, 0.6) - 1.0);
    const double sbytes = std::max(spkts * 40.0, d.ln(p.sbytes_mu, 0.7));
    const double dbytes = dpkts > 0 ? std::max(dpkts * 40.0, d.ln(p.dbytes_mu, 0.8)) : 0.0;
    const double dur = std::max(0.0, std::exp(p.dur_mu + 1.0 * d.rng.normal()));
    const double r = dur > 0 ? (spkts + dpkts) / dur : 0.0;
    const bool tcp = proto == "tcp";
    const double ct = d.i(static_cast<long>(p.ct_lo), static_cast<long>(p.ct_hi));
    return {num(dur), proto, service, state, num(spkts), num(dpkts), num(sbytes), num(dbytes), num(r), num(p.sttl),
            num(p.dttl), num(dur > 0 ? sbytes * 8 / dur : 0.0), num(dur > 0 ? dbytes * 8 / dur : 0.0),
            num(std::floor(spkts * d.u(0.0, 0.05))), num(std::floor(dpkts * d.u(0.0, 0.05))),
            num(spkts > 1 ? dur * 1000 / (spkts - 1) : 0.0), num(dpkts > 1 ? dur * 1000 / (dpkts - 1) : 0.0),
            num(d.u(0.0, 50.0)), num(d.u(0.0, 50.0)), tcp ? "255" : "0", tcp ? num(d.i(1, 4000000000)) : "0",
            tcp ? num(d.i(1, 4000000000)) : "0", tcp ? "255" : "0", num(tcp ? d.u(0.0, 0.2) : 0.0),
            num(tcp ? d.u(0.0, 0.1) : 0.0), num(tcp ? d.u(0.0, 0.1) : 0.0), num(std::round(sbytes / spkts)),
            num(dpkts > 0 ? std::round(dbytes / dpkts) : 0.0), num(service == "http" ? d.i(0, 2) : 0),
            num(service == "http" ? d.ln(6.0, 2.0) : 0.0), num(ct), num(d.i(0, 6)), num(std::max(1.0, ct - d.i(0, 3))),
            num(std::max(1.0, ct - d.i(0, 5))), num(std::max(1.0, ct - d.i(0, 8))), num(std::max(1.0, ct - d.i(0, 4))),
            service == "ftp" ? "1" : "0", service == "ftp" ? num(d.i(0, 2)) : "0", num(service == "http" ? d.i(0, 3) : 0),
            num(std::max(1.0, ct - d.i(0, 2))), num(ct), "0"};
}

inline std::vector<Subtype> unswnb15_subtypes() {
    auto make = [](std::string name, int cls, std::size_t count, UnswProfile p) {
        return Subtype{std::move(name), cls, count, [p](Draw& d) { return unsw_row(d, p); }};
    };
    const std::vector<std::pair<std::string, double>> tcp{{"tcp", 0.9}, {"udp", 0.1}};
    const std::vector<std::pair<std::string, double>> udp{{"udp", 0.9}, {"tcp", 0.1}};
    const std::vector<std::pair<std::string, double>> mixed{{"tcp", 0.5}, {"udp", 0.3}, {"unas", 0.1}, {"arp", 0.1}};
    const std::vector<std::pair<std::string, double>> fin{{"FIN", 0.8}, {"CON", 0.1}, {"INT", 0.1}};
    const std::vector<std::pair<std::string, double>> intr{{"INT", 0.9}, {"FIN", 0.1}};
    const std::vector<std::pair<std::string, double>> web{{"http", 0.4}, {"-", 0.4}, {"ftp", 0.1}, {"smtp", 0.1}};
    const std::vector<std::pair<std::string, double>> none{{"-", 0.9}, {"dns", 0.1}};
    std::vector<Subtype> s;
    s.push_back(make("Normal", 0, 56000, {tcp, {{"-", 0.5}, {"http", 0.2}, {"ftp", 0.1}, {"dns", 0.1}, {"smtp", 0.1}}, fin, 3.0, 3.0, 7.0, 9.0, -1.0, 31, 29, 1, 5}));
    s.push_back(make("Generic", 1, 40000, {udp, {{"dns", 0.9}, {"-", 0.1}}, intr, 0.7, 0.0, 4.7, 0.0, -12.0, 254, 0, 20, 60}));
    s.push_back(make("Exploits", 2, 33393, {tcp, web, fin, 2.8, 2.5, 7.5, 7.0, -0.5, 254, 252, 1, 10}));
    s.push_back(make("Fuzzers", 3, 18184, {tcp, none, fin, 2.3, 2.0, 6.5, 5.0, 0.0, 254, 252, 1, 8}));
    s.push_back(make("DoS", 4, 12264, {tcp, web, fin, 2.5, 2.2, 7.0, 6.5, -1.5, 254, 252, 1, 12}));
    s.push_back(make("Reconnaissance", 5, 10491, {mixed, none, intr, 1.5, 1.0, 5.5, 4.5, -3.0, 254, 252, 2, 15}));
    s.push_back(make("Analysis", 6, 2000, {{{"tcp", 0.5}, {"udp", 0.2}, {"unas", 0.3}}, {{"-", 0.8}, {"http", 0.2}}, intr, 1.0, 0.5, 5.0, 3.0, -6.0, 254, 0, 1, 6}));
    s.push_back(make("Backdoor", 7, 1746, {tcp, {{"-", 0.9}, {"http", 0.1}}, intr, 1.2, 0.5, 5.2, 3.0, -5.0, 254, 0, 1, 5}));
    s.push_back(make("Shellcode", 8, 1133, {{{"tcp", 0.4}, {"udp", 0.2}, {"unas", 0.4}}, none, intr, 1.0, 0.3, 6.0, 2.0, -8.0, 254, 0, 1, 4}));
    s.push_back(make("Worms", 9, 130, {tcp, {{"http", 0.7}, {"-", 0.3}}, fin, 2.5, 2.5, 7.0, 7.5, -0.5, 254, 252, 1, 3}));
    return s;
}

inline std::string render_rows(const std::vector<Subtype>& subs, const Options& opt, std::string_view tag,
                               const std::function<void(std::string&, std::vector<std::string>&, const Subtype&, std::size_t, Draw&)>& emit) {
    Rng rng(derive_seed(opt.seed, tag));
    Draw d{rng};
    const auto rows = plan(subs, opt, rng);
    std::string out;
    std::size_t k = 0;
    for (const auto& [label_src, feature_src] : rows) {
        auto cells = feature_src->gen(d);
        emit(out, cells, *label_src, k++, d);
    }
    return out;
}

}  // namespace detail

/// KDDTrain+-style file: no header, 41 features, label, difficulty.
inline std::string nslkdd_text(const Options& opt = {}) {
    return detail::render_rows(detail::nslkdd_subtypes(), opt, "synthetic-nslkdd",
                               [](std::string& out, std::vector<std::string>& cells, const detail::Subtype& s, std::size_t, detail::Draw& d) {
                                   cells.push_back(s.label);
                                   cells.push_back(detail::num(d.i(s.cls == 0 ? 18 : 10, 21)));
                                   out += text::join(cells, ",") + "\n";
                               });
}

/// Flow CSVs split across `files` daily files, each with the full header.
inline std::vector<std::string> cicids2017_texts(const Options& opt = {}, std::size_t files = 2) {
    const auto body = detail::render_rows(detail::cicids2017_subtypes(), opt, "synthetic-cicids2017",
                                          [](std::string& out, std::vector<std::string>& cells, const detail::Subtype& s, std::size_t, detail::Draw&) {
                                              cells.push_back(s.label);
                                              out += text::join(cells, ",") + "\n";
                                          });
    const auto header = text::join(detail::cic_header(), ",") + "\n";
    const auto lines = text::split(body, '\n');
    const std::size_t n = lines.size() - 1;
    files = std::max<std::size_t>(1, std::min(files, n));
    std::vector<std::string> out;
    for (std::size_t f = 0; f < files; ++f) {
        std::string text = header;
        for (std::size_t i = f * n / files; i < (f + 1) * n / files; ++i) {
            text += lines[i];
            text += "\n";
        }
        out.push_back(std::move(text));
    }
    return out;
}

/// Training-partition CSV with header (45 columns).
inline std::string unswnb15_text(const Options& opt = {}) {
    std::string out = text::join(detail::unsw_header(), ",") + "\n";
    out += detail::render_rows(detail::unswnb15_subtypes(), opt, "synthetic-unswnb15",
                               [](std::string& o, std::vector<std::string>& cells, const detail::Subtype& s, std::size_t k, detail::Draw&) {
                                   cells.insert(cells.begin(), std::to_string(k + 1));
                                   cells.push_back(s.cls == 0 ? "" : s.label);
                                   cells.push_back(s.cls == 0 ? "0" : "1");
                                   o += text::join(cells, ",") + "\n";
                               });
    return out;
}

inline std::filesystem::path write_nslkdd(const std::filesystem::path& path, const Options& opt = {}) {
    detail::write_all(path, nslkdd_text(opt));
    return path;
}

inline std::vector<std::filesystem::path> write_cicids2017(const std::filesystem::path& dir, const Options& opt = {},
                                                           std::size_t files = 2) {
    std::vector<std::filesystem::path> paths;
    const auto texts = cicids2017_texts(opt, files);
    for (std::size_t f = 0; f < texts.size(); ++f) {
        paths.push_back(dir / ("day" + std::to_string(f + 1) + ".pcap_ISCX.csv"));
        detail::write_all(paths.back(), texts[f]);
    }
    return paths;
}

inline std::filesystem::path write_unswnb15(const std::filesystem::path& path, const Options& opt = {}) {
    detail::write_all(path, unswnb15_text(opt));
    return path;
}

}  // namespace ensembleguard::synthetic
