#include "idsbench/bench.hpp"
#include "idsbench/error.hpp"

#include <array>

namespace ids {

namespace {

ColumnRule feature(std::string name, FeatureKind kind = FeatureKind::Numeric) {
    return {std::move(name), kind, ColumnRole::Feature};
}

ColumnRule role_only(std::string name, ColumnRole role) { return {std::move(name), std::nullopt, role}; }

// NSL-KDD ships without a header: 41 features, the class token and a difficulty score.
ScenarioSchema network_schema() {
    static constexpr std::array<const char*, 41> kNames = {
        "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land", "wrong_fragment", "urgent",
        "hot", "num_failed_logins", "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
        "num_file_creations", "num_shells", "num_access_files", "num_outbound_cmds", "is_host_login",
        "is_guest_login", "count", "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
        "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
        "dst_host_same_srv_rate", "dst_host_diff_srv_rate", "dst_host_same_src_port_rate",
        "dst_host_srv_diff_host_rate", "dst_host_serror_rate", "dst_host_srv_serror_rate", "dst_host_rerror_rate",
        "dst_host_srv_rerror_rate"};
    ScenarioSchema s;
    s.id = "network";
    s.header = false;
    for (const char* name : kNames) {
        const std::string n = name;
        const bool categorical = n == "protocol_type" || n == "service" || n == "flag";
        s.columns.push_back(feature(n, categorical ? FeatureKind::Categorical : FeatureKind::Numeric));
    }
    s.columns.push_back(role_only("class", ColumnRole::Label));
    s.columns.push_back(role_only("difficulty", ColumnRole::Dropped));
    s.label_spec.negative_tokens = {"normal"};
    s.label_spec.mode = LabelSpec::Mode::Complement;
    s.expected = {25192, 41, 13449, 11743, 11743};
    return s;
}

// Drebin-215: 215 binary indicators plus the class column (B benign, S malware).
ScenarioSchema android_schema() {
    ScenarioSchema s;
    s.id = "android";
    s.header = true;
    s.columns.push_back(role_only("class", ColumnRole::Label));
    s.other_columns = ColumnRule{"", FeatureKind::Binary, ColumnRole::Feature};
    s.label_spec.negative_tokens = {"B"};
    s.label_spec.positive_tokens = {"S"};
    s.expected = {15036, 215, 9476, 5560, 5560};
    return s;
}

// Edge-IIoTset ML subset. Identifiers, timestamps and free-text payload
// fields are dropped; the remaining kinds are inferred.
ScenarioSchema iot_schema() {
    static constexpr std::array<const char*, 16> kDropped = {
        "Attack_type", "frame.time", "ip.src_host", "ip.dst_host", "arp.src.proto_ipv4", "arp.dst.proto_ipv4",
        "http.file_data", "http.request.full_uri", "icmp.transmit_timestamp", "http.request.uri.query",
        "tcp.options", "tcp.payload", "tcp.srcport", "tcp.dstport", "udp.port", "mqtt.msg"};
    ScenarioSchema s;
    s.id = "iot";
    s.header = true;
    s.columns.push_back(role_only("Attack_label", ColumnRole::Label));
    for (const char* name : kDropped) s.columns.push_back(role_only(name, ColumnRole::Dropped));
    s.other_columns = ColumnRule{"", std::nullopt, ColumnRole::Feature};
    s.level_guard_fraction = 0.5;
    s.label_spec.negative_tokens = {"0", "0.0"};
    s.label_spec.positive_tokens = {"1", "1.0"};
    s.expected = {157800, std::nullopt, 24301, 133499, 24301};
    return s;
}

} // namespace

std::vector<std::string> builtin_scenarios() { return {"network", "android", "iot"}; }

ScenarioSchema builtin_schema(std::string_view scenario) {
    if (scenario == "network") return network_schema();
    if (scenario == "android") return android_schema();
    if (scenario == "iot") return iot_schema();
    fail(ErrorCode::Config, "UnknownScenario",
         "unknown scenario '" + std::string(scenario) + "' (expected network, android or iot)");
}

} // namespace ids
