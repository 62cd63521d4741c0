// SPDX-License-Identifier: Apache-2.0
#include "fbsd/simulator.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fbsd/rng.hpp"

namespace fbsd::sim {

namespace {

constexpr std::int64_t kPlain = 0;
constexpr std::int64_t kIntegrity = 1;
constexpr std::int64_t kProtected = 2;
constexpr std::int64_t kNewContext = 3;
constexpr std::int64_t kNewContextCiphered = 4;
constexpr std::int64_t kServiceHeader = 12;

// Establishment causes.
constexpr std::int64_t kMtAccess = 2;
constexpr std::int64_t kMoSignalling = 3;
constexpr std::int64_t kMoData = 4;

struct Cell {
    std::int64_t mcc = 0;
    std::int64_t mnc = 0;
    std::int64_t tac = 0;
    std::int64_t pci = 0;
    std::int64_t cell_id = 0;
    std::int64_t rsrp = 0;
    std::int64_t earfcn = 0;
};

struct Ue {
    std::string imsi;
    std::string imeisv;
    std::int64_t tmsi = 0;
    std::int64_t mmec = 0;
};

const std::vector<std::string> kImsiPool = {
    "001010000000011", "001010000000012", "001010000000013",
    "001010000000014", "001010000000015", "001010000000016",
};
const std::vector<std::string> kImeisvPool = {
    "3534900698733101", "3534900698733102", "3567150921845201", "3567150921845202",
};
const std::vector<std::pair<std::int64_t, std::int64_t>> kOperators = {{310, 410}, {310, 260}, {311, 480}};
const std::vector<std::string> kNetworkNames = {"Carrier", "Carrier LTE", "Mobile"};
const std::vector<std::int64_t> kEarfcns = {850, 1975, 2175, 5230};

Ue make_ue(Rng& rng) {
    Ue ue;
    ue.imsi = rng.pick(kImsiPool);
    ue.imeisv = rng.pick(kImeisvPool);
    ue.tmsi = rng.range(1, 8);
    ue.mmec = rng.range(1, 3);
    return ue;
}

// Deployment site table: operator, tracking area, pci, cell id, earfcn.
struct Site {
    std::size_t op;
    std::int64_t tac, pci, cell_id, earfcn;
};
const std::vector<Site> kSites = {
    {0, 101, 12, 4101, 850},  {0, 101, 87, 4102, 850},  {0, 102, 143, 4201, 1975}, {0, 102, 201, 4202, 1975},
    {1, 211, 33, 5301, 2175}, {1, 211, 64, 5302, 2175}, {1, 212, 301, 5401, 5230}, {1, 212, 377, 5402, 5230},
    {2, 321, 5, 6501, 850},   {2, 321, 118, 6502, 850}, {2, 322, 420, 6601, 1975}, {2, 322, 466, 6602, 1975},
};

// Stock configurations of open-source FBS stacks: tac, pci, cell id.
const std::vector<std::array<std::int64_t, 3>> kFbsDefaults = {{7, 1, 411}, {1, 0, 1}, {7, 500, 27}, {12, 3, 256}};

Cell site_cell(const Site& s, Rng& rng) {
    Cell c;
    c.mcc = kOperators[s.op].first;
    c.mnc = kOperators[s.op].second;
    c.tac = s.tac;
    c.pci = s.pci;
    c.cell_id = s.cell_id;
    c.earfcn = s.earfcn;
    c.rsrp = rng.range(-110, -86);
    return c;
}

Cell make_legit_cell(Rng& rng) { return site_cell(rng.pick(kSites), rng); }

Cell neighbour_cell(Rng& rng, const Cell& serving) {
    std::vector<Site> cands;
    for (const auto& s : kSites)
        if (kOperators[s.op].first == serving.mcc && kOperators[s.op].second == serving.mnc && s.tac != serving.tac)
            cands.push_back(s);
    return site_cell(rng.pick(cands), rng);
}

Cell make_fbs_cell(Rng& rng, const Cell& legit, int level) {
    Cell c;
    if (level == 0) {
        const auto& d = rng.pick(kFbsDefaults);
        c.mcc = 1;
        c.mnc = 1;
        c.tac = d[0];
        c.pci = d[1];
        c.cell_id = d[2];
        c.rsrp = rng.range(-55, -40);
        c.earfcn = rng.pick(kEarfcns);
        return c;
    }
    if (level == 1) {
        c = neighbour_cell(rng, legit);
        c.rsrp = rng.range(-84, -76);
        return c;
    }
    c = legit;
    c.rsrp = rng.range(-84, -76);
    return c;
}

FieldMap merge(FieldMap base, const FieldMap& over) {
    for (const auto& [k, v] : over) {
        if (is_absent(v)) base.erase(k);
        else base.insert_or_assign(k, v);
    }
    return base;
}

FieldMap nas_defaults(std::string_view kind, const Ue& ue, const Cell& cell) {
    FieldMap f;
    f["gsm_a_L3_protocol_discriminator"] = std::int64_t{7};
    if (kind == "AttachRequest") {
        f["nas_eps_emm_eps_att"] = std::int64_t{1};
        f["nas_eps_emm_type_of"] = std::int64_t{1};
        f["e212_imsi"] = ue.imsi;
        f["nas_eps_emm_nas_key_setid"] = std::int64_t{7};
        f["nas_eps_emm_esm_msg"] = std::int64_t{1};
        f["nas_eps_emm_eea0"] = std::int64_t{1};
        f["nas_eps_emm_128eea1"] = std::int64_t{1};
        f["nas_eps_emm_128eia1"] = std::int64_t{1};
        f["nas_eps_emm_128eia2"] = std::int64_t{1};
    } else if (kind == "AuthenticationRequest") {
        f["nas_eps_emm_nas_key_setid"] = std::int64_t{0};
        f["gsm_a_dtap_rand"] = std::int64_t{1};
        f["gsm_a_dtap_autn"] = std::int64_t{1};
    } else if (kind == "AuthenticationResponse") {
        f["nas_eps_emm_res"] = std::int64_t{1};
    } else if (kind == "AuthenticationFailure") {
        f["nas_eps_emm_cause"] = std::int64_t{21};
    } else if (kind == "SecurityModeCommand") {
        f["nas_eps_emm_toc"] = std::int64_t{2};
        f["nas_eps_emm_toi"] = std::int64_t{2};
        f["nas_eps_emm_imeisv_req"] = std::int64_t{1};
        f["nas_eps_emm_nas_key_setid"] = std::int64_t{0};
    } else if (kind == "SecurityModeComplete") {
        f["gsm_a_imeisv"] = ue.imeisv;
    } else if (kind == "SecurityModeReject") {
        f["nas_eps_emm_cause"] = std::int64_t{24};
    } else if (kind == "AttachAccept" || kind == "TrackingAreaUpdateAccept") {
        if (kind == "AttachAccept") {
            f["nas_eps_emm_EPS_attach"] = std::int64_t{1};
            f["nas_eps_emm_esm_msg"] = std::int64_t{1};
        } else {
            f["nas_eps_emm_eps_update_resultvalue"] = std::int64_t{0};
        }
        f["e212_tai_mcc"] = cell.mcc;
        f["e212_tai_mnc"] = cell.mnc;
        f["nas_eps_emm_tai_tac"] = cell.tac;
        f["nas_eps_emm_guti_type"] = std::int64_t{6};
        f["nas_eps_emm_m_tmsi"] = ue.tmsi;
        f["nas_eps_emm_mme_grp"] = std::int64_t{1};
        f["nas_eps_emm_mme_code"] = ue.mmec;
    } else if (kind == "AttachComplete") {
        f["nas_eps_emm_esm_msg"] = std::int64_t{1};
    } else if (kind == "EMMInformation") {
        f["gsm_a_dtap_text_string"] = kNetworkNames[static_cast<std::size_t>(cell.mnc) % kNetworkNames.size()];
        f["gsm_a_dtap_coding_scheme"] = std::int64_t{0};
        f["gsm_a_dtap_timezone"] = std::int64_t{-20};
    } else if (kind == "DetachRequest") {
        f["nas_eps_emm_detach_type"] = std::int64_t{1};
        f["nas_eps_emm_switch_off"] = std::int64_t{1};
        f["nas_eps_emm_m_tmsi"] = ue.tmsi;
    } else if (kind == "TrackingAreaUpdateRequest") {
        f["nas_eps_emm_update_type"] = std::int64_t{0};
        f["nas_eps_emm_active_flg"] = std::int64_t{0};
        f["nas_eps_emm_m_tmsi"] = ue.tmsi;
        f["nas_eps_emm_nas_key_setid"] = std::int64_t{0};
        f["e212_tai_mcc"] = cell.mcc;
        f["e212_tai_mnc"] = cell.mnc;
    } else if (kind == "TrackingAreaUpdateReject" || kind == "AttachReject" || kind == "ServiceReject") {
        f["nas_eps_emm_cause"] = std::int64_t{7};
    } else if (kind == "IdentityRequest") {
        f["nas_eps_emm_id_type2"] = std::int64_t{1};
    } else if (kind == "IdentityResponse") {
        f["gsm_a_ie_mobileid_type"] = std::int64_t{1};
        f["e212_imsi"] = ue.imsi;
    } else if (kind == "ServiceRequest") {
        f["nas_eps_emm_nas_key_setid"] = std::int64_t{0};
    } else if (kind == "PagingWithIMSI") {
        f["e212_imsi"] = ue.imsi;
    }
    return f;
}

FieldMap rrc_defaults(std::string_view kind, const Cell& cell, const Ue& ue) {
    FieldMap f;
    if (kind == "systemInformationBlockType1") {
        f["lte_rrc_BCCH_DL_SCH_Messageelement"] = std::int64_t{1};
        f["lte_rrc_mcc"] = cell.mcc;
        f["lte_rrc_mnc"] = cell.mnc;
        f["lte_rrc_trackingAreaCode"] = cell.tac;
        f["lte_rrc_cellIdentity"] = cell.cell_id;
        f["lte_rrc_physCellId"] = cell.pci;
        f["lte_rrc_rsrpResult"] = cell.rsrp;
        f["lte_rrc_dl_CarrierFreq"] = cell.earfcn;
        f["lte_rrc_q_RxLevMin"] = std::int64_t{-64};
        f["lte_rrc_cellReselectionPriority"] = std::int64_t{5};
        f["lte_rrc_cellBarred"] = std::int64_t{1};
        f["lte_rrc_systemInfoValueTag"] = std::int64_t{0};
    } else if (kind == "systemInformation") {
        f["lte_rrc_BCCH_DL_SCH_Messageelement"] = std::int64_t{1};
        f["lte_rrc_schedulingInfoList"] = std::int64_t{1};
    } else if (kind == "rrcConnectionRequest") {
        f["lte_rrc_UL_CCCH_Message"] = std::int64_t{1};
        f["lte_rrc_rrcConnectionRequest_element"] = std::int64_t{1};
        f["lte_rrc_ue_Identity"] = std::int64_t{0};
        f["lte_rrc_m_TMSI"] = ue.tmsi;
        f["lte_rrc_mmec"] = ue.mmec;
        f["lte_rrc_establishmentCause"] = kMoSignalling;
    } else if (kind == "rrcConnectionSetup") {
        f["lte_rrc_DL_CCCH_Message"] = std::int64_t{1};
        f["lte_rrc_rrcConnectionSetup_r8_element"] = std::int64_t{1};
        f["lte_rrc_srb_ToAddModList"] = std::int64_t{1};
        f["lte_rrc_mac_MainConfig"] = std::int64_t{1};
    } else if (kind == "rrcConnectionSetupComplete") {
        f["lte_rrc_UL_DCCH_Message"] = std::int64_t{1};
        f["lte_rrc_rrcConnectionSetupComplete_element"] = std::int64_t{1};
        f["lte_rrc_selectedPLMN_Identity"] = std::int64_t{1};
    } else if (kind == "rrcConnectionRelease") {
        f["lte_rrc_rrcConnectionRelease_element"] = std::int64_t{1};
        f["lte_rrc_releaseCause"] = std::int64_t{1};
    } else if (kind == "dlInformationTransfer") {
        f["lte_rrc_dlInformationTransfer_element"] = std::int64_t{1};
        f["lte_rrc_dedicatedInfoType"] = std::int64_t{0};
    } else if (kind == "ulInformationTransfer") {
        f["lte_rrc_ulInformationTransfer_element"] = std::int64_t{1};
        f["lte_rrc_dedicatedInfoType"] = std::int64_t{0};
    } else if (kind == "securityModeCommand") {
        f["lte_rrc_securityModeCommand_element"] = std::int64_t{1};
        f["lte_rrc_securityConfigSMC_element"] = std::int64_t{1};
        f["lte_rrc_integrityProtAlgorithm"] = std::int64_t{2};
        f["lte_rrc_cipheringAlgorithm"] = std::int64_t{2};
    } else if (kind == "securityModeComplete") {
        f["lte_rrc_securityModeComplete_element"] = std::int64_t{1};
    } else if (kind == "ueCapabilityEnquiry") {
        f["lte_rrc_ueCapabilityEnquiry_element"] = std::int64_t{1};
        f["lte_rrc_rat_Type"] = std::int64_t{0};
    } else if (kind == "ueCapabilityInformation") {
        f["lte_rrc_ueCapabilityInformation_element"] = std::int64_t{1};
        f["lte_rrc_ue_Category"] = std::int64_t{4};
        f["lte_rrc_accessStratumRelease"] = std::int64_t{10};
    } else if (kind == "rrcConnectionReconfiguration") {
        f["lte_rrc_rrcConnectionReconfiguration_r8_element"] = std::int64_t{1};
        f["lte_rrc_radioResourceConfigDedicated_element"] = std::int64_t{1};
        f["lte_rrc_drb_ToAddModList"] = std::int64_t{1};
    } else if (kind == "rrcConnectionReconfigurationComplete") {
        f["lte_rrc_UL_DCCH_Message"] = std::int64_t{1};
    } else if (kind == "rrcConnectionReestablishmentRequest") {
        f["lte_rrc_reestablishmentCause"] = std::int64_t{2};
        f["lte_rrc_physCellId"] = cell.pci;
    } else if (kind == "rrcConnectionReestablishment") {
        f["lte_rrc_DL_CCCH_Message"] = std::int64_t{1};
    } else if (kind == "rrcConnectionReestablishmentComplete") {
        f["lte_rrc_UL_DCCH_Message"] = std::int64_t{1};
    } else if (kind == "rrcConnectionReestablishmentReject") {
        f["lte_rrc_DL_CCCH_Message"] = std::int64_t{1};
        f["per_extension_bit"] = std::int64_t{0};
    } else if (kind == "ueInformationRequest") {
        f["lte_rrc_rach_ReportReq_r9"] = std::int64_t{1};
        f["lte_rrc_rlf_ReportReq_r9"] = std::int64_t{1};
    } else if (kind == "ueInformationResponse") {
        f["lte_rrc_ueInformationResponse_r9_element"] = std::int64_t{1};
        f["lte_rrc_rlf_Report_r9"] = std::int64_t{1};
        f["lte_rrc_rsrpResult_r9"] = cell.rsrp;
        f["lte_rrc_measResultNeighCells_r9"] = std::int64_t{1};
    } else if (kind == "paging") {
        f["lte_rrc_PCCH_Message_element"] = std::int64_t{1};
        f["lte_rrc_pagingRecordList"] = std::int64_t{1};
        f["lte_rrc_cn_Domain"] = std::int64_t{0};
        f["lte_rrc_s_TMSI"] = ue.tmsi;
        f["lte_rrc_systemInfoModification"] = std::int64_t{0};
    } else if (kind == "rrcResume") {
        f["lte_rrc_resumeIdentity_r13"] = std::int64_t{1};
    } else if (kind == "rrcReject") {
        f["lte_rrc_waitTime"] = std::int64_t{16};
    }
    return f;
}

class Builder {
public:
    Builder(Trace& trace, const Ue& ue) : trace_(trace), ue_(ue) {}

    Packet& rrc(std::string_view kind, const Cell& cell, Label label, const FieldMap& extra = {}) {
        return emit(Layer::Rrc, kind, label, merge(rrc_defaults(kind, cell, ue_), extra));
    }

    Packet& nas(std::string_view kind, const Cell& cell, Label label, std::int64_t header,
                const FieldMap& extra = {}) {
        FieldMap f = nas_defaults(kind, ue_, cell);
        f["nas_eps_security_header_type"] = header;
        if (header != kPlain) {
            f["nas_eps_msg_auth_code"] = std::int64_t{1};
            f["nas_eps_seq_no"] = std::min<std::int64_t>(nas_count_++, 15);
        }
        return emit(Layer::Nas, kind, label, merge(std::move(f), extra));
    }

    static std::string carried(std::string_view kind, const FieldMap& nas_fields) {
        auto it = nas_fields.find("nas_eps_security_header_type");
        std::int64_t h = it != nas_fields.end() && std::holds_alternative<std::int64_t>(it->second)
                             ? std::get<std::int64_t>(it->second) : 0;
        return std::string(kind) + ":" + std::to_string(h);
    }

    // NAS message carried by an RRC information transfer.
    void nas_transfer(bool downlink, std::string_view kind, const Cell& cell, Label label,
                      std::int64_t header, const FieldMap& extra = {}) {
        Packet& carrier = rrc(downlink ? "dlInformationTransfer" : "ulInformationTransfer", cell, label);
        std::size_t carrier_pos = trace_.packets.size() - 1;
        (void)carrier;
        Packet& n = nas(kind, cell, label, header, extra);
        trace_.packets[carrier_pos].fields["lte_rrc_dedicatedInfoNAS"] = carried(kind, n.fields);
    }

    void connect(std::string_view nas_kind, const Cell& cell, Label label, std::int64_t header,
                 const FieldMap& extra = {}, std::int64_t cause = kMoSignalling) {
        rrc("rrcConnectionRequest", cell, label, {{"lte_rrc_establishmentCause", cause}});
        rrc("rrcConnectionSetup", cell, label);
        rrc("rrcConnectionSetupComplete", cell, label);
        std::size_t carrier_pos = trace_.packets.size() - 1;
        Packet& n = nas(nas_kind, cell, label, header, extra);
        trace_.packets[carrier_pos].fields["lte_rrc_dedicatedInfoNAS"] = carried(nas_kind, n.fields);
    }

    void page(std::string_view nas_kind, const Cell& cell, Label label, const FieldMap& extra = {}) {
        rrc("paging", cell, label, {{"lte_rrc_imsi", std::int64_t{1}}, {"lte_rrc_ue_Identity", std::int64_t{1}}});
        std::size_t carrier_pos = trace_.packets.size() - 1;
        Packet& n = nas(nas_kind, cell, label, kPlain, extra);
        trace_.packets[carrier_pos].fields["lte_rrc_dedicatedInfoNAS"] = carried(nas_kind, n.fields);
    }

    void chatter(Rng& rng, double noise, const Cell& cell) {
        int n = rng.geometric(noise, 40);
        for (int i = 0; i < n; ++i) {
            bool down = rng.chance(0.5);
            rrc(down ? "dlInformationTransfer" : "ulInformationTransfer", cell, Label::benign(),
                {{"lte_rrc_dedicatedInfoNAS", std::string("ESM:2")}, {"lte_rrc_dedicatedInfoType", std::int64_t{1}}});
        }
        int procedures = rng.chance(noise) ? 1 + rng.geometric(noise, 2) : 0;
        for (int i = 0; i < procedures; ++i) network_procedure(rng, cell);
    }

    // Network-initiated procedures of a connected, secured session.
    void network_procedure(Rng& rng, const Cell& cell) {
        const Label benign = Label::benign();
        switch (rng.index(3)) {
            case 0:
                nas_transfer(true, "IdentityRequest", cell, benign, kProtected,
                             {{"nas_eps_emm_id_type2", std::int64_t{3}}});
                nas_transfer(false, "IdentityResponse", cell, benign, kProtected,
                             {{"gsm_a_ie_mobileid_type", std::int64_t{3}}, {"e212_imsi", FieldValue{}},
                              {"gsm_a_imeisv", ue_.imeisv}});
                break;
            case 1:
                nas_transfer(true, "AuthenticationRequest", cell, benign, kIntegrity,
                             {{"nas_eps_emm_nas_key_setid", std::int64_t{1}}});
                nas_transfer(false, "AuthenticationResponse", cell, benign, kIntegrity);
                break;
            default:
                nas_transfer(true, "EMMInformation", cell, benign, kProtected);
                break;
        }
    }

private:
    Packet& emit(Layer layer, std::string_view kind, Label label, FieldMap fields) {
        Packet p;
        p.trace_id = trace_.trace_id;
        p.seq = seq_++;
        p.layer = layer;
        p.kind = std::string(kind);
        p.fields = std::move(fields);
        p.label = label;
        trace_.packets.push_back(std::move(p));
        return trace_.packets.back();
    }

    Trace& trace_;
    const Ue& ue_;
    std::uint32_t seq_ = 0;
    std::int64_t nas_count_ = 0;
};

// Golden attach flow up to EMMInformation.
void attach_flow(Builder& b, const Cell& cell) {
    const Label L = Label::benign();
    b.rrc("systemInformationBlockType1", cell, L);
    b.connect("AttachRequest", cell, L, kPlain);
    b.nas_transfer(true, "AuthenticationRequest", cell, L, kPlain);
    b.nas_transfer(false, "AuthenticationResponse", cell, L, kPlain);
    b.nas_transfer(true, "SecurityModeCommand", cell, L, kNewContext);
    b.nas_transfer(false, "SecurityModeComplete", cell, L, kNewContextCiphered);
    b.rrc("securityModeCommand", cell, L);
    b.rrc("securityModeComplete", cell, L);
    b.rrc("ueCapabilityEnquiry", cell, L);
    b.rrc("ueCapabilityInformation", cell, L);
    b.rrc("rrcConnectionReconfiguration", cell, L,
          {{"lte_rrc_dedicatedInfoNAS", std::string("AttachAccept:2")}});
    b.nas("AttachAccept", cell, L, kProtected);
    b.rrc("rrcConnectionReconfigurationComplete", cell, L);
    b.nas_transfer(false, "AttachComplete", cell, L, kProtected);
    b.nas_transfer(true, "EMMInformation", cell, L, kProtected);
}

enum class Outcome { Accept, Reject, Drop };

struct Episode {
    bool identity = false;
    Outcome outcome = Outcome::Accept;
};

// Mobility episodes: a first accepted handover, one episode ending in reject
// or drop (the FBS slot in FBS traces), and an optional trailing accept.
struct MobilityPlan {
    std::vector<Episode> episodes;
    std::size_t special = 0;
};

MobilityPlan plan_mobility(Rng& rng, bool mobility) {
    MobilityPlan plan;
    if (mobility) plan.episodes.push_back({rng.chance(0.5), Outcome::Accept});
    Episode special;
    special.outcome = rng.chance(0.5) ? Outcome::Reject : Outcome::Drop;
    special.identity = special.outcome == Outcome::Drop ? true : rng.chance(0.5);
    plan.special = plan.episodes.size();
    plan.episodes.push_back(special);
    if (mobility && rng.chance(0.5)) plan.episodes.push_back({rng.chance(0.5), Outcome::Accept});
    return plan;
}

const std::vector<std::int64_t> kLegitRejectCauses = {9, 10, 40};
const std::vector<std::int64_t> kFbsRejectCauses = {7, 12, 13, 15};

void legit_episode(Builder& b, Rng& rng, const Cell& cell, const Episode& e, double noise) {
    const Label L = Label::benign();
    b.rrc("systemInformationBlockType1", cell, L);
    b.connect("TrackingAreaUpdateRequest", cell, L, kIntegrity);
    if (e.identity) {
        b.nas_transfer(true, "IdentityRequest", cell, L, kProtected, {{"nas_eps_emm_id_type2", std::int64_t{3}}});
        b.nas_transfer(false, "IdentityResponse", cell, L, kProtected,
                       {{"gsm_a_ie_mobileid_type", std::int64_t{3}}, {"e212_imsi", FieldValue{}}});
    }
    if (e.outcome == Outcome::Drop) return;
    b.rrc("securityModeCommand", cell, L);
    b.rrc("securityModeComplete", cell, L);
    if (e.outcome == Outcome::Accept) {
        b.nas_transfer(true, "TrackingAreaUpdateAccept", cell, L, kProtected);
        b.chatter(rng, noise, cell);
    } else {
        b.nas_transfer(true, "TrackingAreaUpdateReject", cell, L, kProtected,
                       {{"nas_eps_emm_cause", rng.pick(kLegitRejectCauses)}});
    }
    b.rrc("rrcConnectionRelease", cell, L);
}

void fbs_episode(Builder& b, Rng& rng, const Cell& fbs, const Episode& e) {
    const Label L = Label::fbs();
    b.rrc("systemInformationBlockType1", fbs, L);
    b.connect("TrackingAreaUpdateRequest", fbs, L, kIntegrity);
    if (e.identity) {
        b.nas_transfer(true, "IdentityRequest", fbs, L, kPlain);
        b.nas_transfer(false, "IdentityResponse", fbs, L, kPlain);
    }
    if (e.outcome == Outcome::Reject) {
        b.nas_transfer(true, "TrackingAreaUpdateReject", fbs, L, kPlain,
                       {{"nas_eps_emm_cause", rng.pick(kFbsRejectCauses)}});
        b.rrc("rrcConnectionRelease", fbs, L, {{"lte_rrc_releaseCause", std::int64_t{3}}});
    }
}

std::string trace_id_for(const ScenarioSpec& spec, std::uint64_t index) {
    std::string tag;
    switch (spec.scenario.kind) {
        case Label::Kind::Benign: tag = "benign"; break;
        case Label::Kind::Fbs: tag = "fbs" + std::to_string(spec.attacker_level); break;
        case Label::Kind::Msa: tag = "msa" + std::to_string(spec.scenario.attack); break;
    }
    std::string idx = std::to_string(index);
    if (idx.size() < 6) idx.insert(0, 6 - idx.size(), '0');
    return tag + "-" + idx;
}

Trace start_trace(const ScenarioSpec& spec, std::uint64_t index) {
    Trace t;
    t.trace_id = trace_id_for(spec, index);
    t.scenario = spec.scenario;
    t.attacker_level = spec.attacker_level;
    t.seed = mix_seed(spec.master_seed, index);
    t.mobility = spec.mobility;
    return t;
}

// Benign and FBS traces share one skeleton; only the special episode differs.
Trace gen_session(const ScenarioSpec& spec, std::uint64_t index, bool fbs) {
    Trace t = start_trace(spec, index);
    Rng rng(t.seed);
    Ue ue = make_ue(rng);
    Cell legit = make_legit_cell(rng);
    Cell fbs_cell = make_fbs_cell(rng, legit, spec.attacker_level);
    MobilityPlan plan = plan_mobility(rng, spec.mobility);
    Builder b(t, ue);
    attach_flow(b, legit);
    b.chatter(rng, spec.noise, legit);

    bool episodes = spec.mobility || fbs;
    if (!episodes) {
        b.nas_transfer(false, "DetachRequest", legit, Label::benign(), kProtected);
        b.rrc("rrcConnectionRelease", legit, Label::benign());
        return t;
    }
    b.rrc("rrcConnectionRelease", legit, Label::benign());
    Cell serving = legit;
    for (std::size_t i = 0; i < plan.episodes.size(); ++i) {
        const Episode& e = plan.episodes[i];
        if (fbs && i == plan.special) {
            fbs_episode(b, rng, fbs_cell, e);
        } else if (!fbs && !spec.mobility) {
            continue;
        } else {
            Cell next = neighbour_cell(rng, serving);
            legit_episode(b, rng, next, e, spec.noise);
            if (e.outcome == Outcome::Accept) serving = next;
        }
    }
    b.rrc("systemInformationBlockType1", serving, Label::benign());
    b.connect("DetachRequest", serving, Label::benign(), kIntegrity);
    b.rrc("rrcConnectionRelease", serving, Label::benign());
    return t;
}

FieldMap F(std::initializer_list<std::pair<const std::string, FieldValue>> xs) { return FieldMap(xs); }

ScriptStep S(StepOp op, std::string kind, FieldMap fields = {}) { return {op, std::move(kind), std::move(fields)}; }

std::vector<AttackScript> make_scripts() {
    using enum StepOp;
    const FieldValue plain = std::int64_t{0};
    auto hdr = [](std::int64_t h) { return FieldMap{{"nas_eps_security_header_type", h}}; };
    auto cause = [](std::int64_t c) {
        return FieldMap{{"nas_eps_emm_cause", c}, {"nas_eps_security_header_type", std::int64_t{0}}};
    };
    (void)plain;
    std::vector<AttackScript> s(kNumAttacks);
    s[0] = {1,
            {S(Connect, "TrackingAreaUpdateRequest", hdr(kIntegrity)),
             S(NasDown, "AuthenticationRequest", merge(hdr(kPlain), F({{"nas_eps_emm_nas_key_setid", std::int64_t{1}}}))),
             S(NasUp, "AuthenticationResponse", hdr(kPlain)),
             S(NasDown, "SecurityModeCommand", hdr(kNewContext)),
             S(NasUp, "SecurityModeComplete", hdr(kNewContextCiphered)),
             S(NasDown, "TrackingAreaUpdateAccept", hdr(kProtected))}};
    s[1] = {2,
            {S(Connect, "AttachRequest", hdr(kPlain)),
             S(NasDown, "AttachReject", merge(cause(7), F({{"gsm_a_extension", std::int64_t{0}}}))),
             S(Rrc, "rrcConnectionRelease", F({{"lte_rrc_releaseCause", std::int64_t{1}}}))}};
    s[2] = {3,
            {S(Rrc, "paging"), S(Rrc, "paging"), S(Rrc, "paging"),
             S(Connect, "TrackingAreaUpdateRequest", merge(hdr(kIntegrity), F({{"nas_eps_emm_active_flg", std::int64_t{1}}}))),
             S(Rrc, "rrcConnectionRelease"),
             S(Connect, "TrackingAreaUpdateRequest", merge(hdr(kIntegrity), F({{"nas_eps_emm_active_flg", std::int64_t{1}}})))}};
    s[3] = {4,
            {S(Connect, "TrackingAreaUpdateRequest", hdr(kIntegrity)),
             S(NasDown, "TrackingAreaUpdateAccept", hdr(kPlain)),
             S(Rrc, "ueInformationRequest"),
             S(Rrc, "ueInformationResponse")}};
    s[4] = {5,
            {S(Connect, "AttachRequest", hdr(kPlain)),
             S(Rrc, "ueCapabilityEnquiry"),
             S(Rrc, "ueCapabilityInformation", F({{"lte_rrc_ue_Category", std::int64_t{1}}})),
             S(NasDown, "AuthenticationRequest", hdr(kPlain)),
             S(NasUp, "AuthenticationResponse", hdr(kPlain)),
             S(NasDown, "SecurityModeCommand", hdr(kNewContext)),
             S(NasUp, "SecurityModeReject", hdr(kPlain))}};
    s[5] = {6,
            {S(Connect, "ServiceRequest", hdr(kServiceHeader)),
             S(Rrc, "rrcConnectionReestablishmentRequest"),
             S(Rrc, "rrcConnectionReestablishmentReject"),
             S(Connect, "ServiceRequest", hdr(kServiceHeader)),
             S(Rrc, "rrcConnectionReestablishmentRequest"),
             S(Rrc, "rrcConnectionReestablishmentReject")}};
    s[6] = {7,
            {S(Connect, "ServiceRequest", hdr(kServiceHeader)),
             S(NasDown, "EMMInformation", hdr(kPlain)),
             S(Rrc, "rrcConnectionReestablishmentRequest"),
             S(Rrc, "rrcConnectionReestablishment"),
             S(Rrc, "rrcConnectionReestablishmentComplete"),
             S(Rrc, "rrcConnectionReestablishmentRequest"),
             S(Rrc, "rrcConnectionReestablishment"),
             S(Rrc, "rrcConnectionReestablishmentComplete")}};
    s[7] = {8,
            {S(Connect, "ServiceRequest", hdr(kServiceHeader)),
             S(NasDown, "ServiceReject", merge(cause(7), F({{"gsm_a_extension", std::int64_t{0}}}))),
             S(Rrc, "rrcConnectionRelease")}};
    s[8] = {9,
            {S(Connect, "AttachRequest", hdr(kPlain)),
             S(NasDown, "IdentityRequest", merge(hdr(kPlain), F({{"nas_eps_emm_id_type2", std::int64_t{3}}}))),
             S(NasUp, "IdentityResponse",
               merge(hdr(kPlain), F({{"gsm_a_ie_mobileid_type", std::int64_t{3}}, {"e212_imsi", FieldValue{}},
                                     {"gsm_a_imeisv", std::string("3534900698733101")}}))),
             S(Rrc, "ueCapabilityEnquiry"),
             S(Rrc, "ueCapabilityInformation")}};
    s[9] = {10,
            {S(Page, "PagingWithIMSI"),
             S(Connect, "AttachRequest", hdr(kPlain)),
             S(NasDown, "AuthenticationRequest", hdr(kPlain)),
             S(NasUp, "AuthenticationResponse", hdr(kPlain)),
             S(Page, "PagingWithIMSI"),
             S(Connect, "AttachRequest", hdr(kPlain))}};
    s[10] = {11,
             {S(Connect, "ServiceRequest", hdr(kServiceHeader)),
              S(Rrc, "rrcResume"), S(Rrc, "rrcResume"), S(Rrc, "rrcResume"),
              S(NasUp, "DetachRequest", merge(hdr(kIntegrity), F({{"nas_eps_emm_switch_off", std::int64_t{0}}})))}};
    s[11] = {12,
             {S(Connect, "TrackingAreaUpdateRequest", hdr(kIntegrity)),
              S(NasDown, "AuthenticationReject", hdr(kPlain)),
              S(Rrc, "rrcConnectionRelease")}};
    s[12] = {13,
             {S(Rrc, "rrcConnectionRequest"),
              S(Rrc, "rrcReject"),
              S(Connect, "AttachRequest", hdr(kPlain)),
              S(Rrc, "rrcConnectionRelease", F({{"lte_rrc_redirectedCarrierInfo", std::int64_t{2}}})),
              S(Connect, "AttachRequest", hdr(kPlain)),
              S(Rrc, "rrcConnectionRelease", F({{"lte_rrc_redirectedCarrierInfo", std::int64_t{2}}}))}};
    s[13] = {14,
             {S(Connect, "TrackingAreaUpdateRequest", hdr(kIntegrity)),
              S(NasDown, "IdentityRequest", merge(hdr(kPlain), F({{"nas_eps_emm_id_type2", std::int64_t{1}}}))),
              S(NasUp, "IdentityResponse", hdr(kPlain)),
              S(Rrc, "rrcConnectionRelease")}};
    s[14] = {15,
             {S(Connect, "TrackingAreaUpdateRequest", hdr(kIntegrity)),
              S(NasDown, "AuthenticationRequest", merge(hdr(kPlain), F({{"nas_eps_emm_nas_key_setid", std::int64_t{6}}}))),
              S(NasUp, "AuthenticationFailure", hdr(kPlain)),
              S(Rrc, "rrcConnectionRelease")}};
    s[15] = {16,
             {S(Connect, "TrackingAreaUpdateRequest", hdr(kIntegrity)),
              S(NasDown, "TrackingAreaUpdateAccept", hdr(kPlain)),
              S(Rrc, "rrcConnectionReconfiguration"),
              S(Rrc, "rrcConnectionReconfiguration"),
              S(Rrc, "rrcConnectionReconfiguration"),
              S(NasUp, "TrackingAreaUpdateRequest", hdr(kIntegrity)),
              S(NasDown, "TrackingAreaUpdateAccept", hdr(kPlain))}};
    s[16] = {17,
             {S(Connect, "TrackingAreaUpdateRequest", hdr(kIntegrity)),
              S(Rrc, "rrcConnectionReconfiguration",
                F({{"lte_rrc_mobilityControlInfo", std::int64_t{1}}, {"lte_rrc_targetPhysCellId", std::int64_t{7}}})),
              S(Rrc, "systemInformationBlockType1"),
              S(Rrc, "rrcConnectionReestablishmentRequest", F({{"lte_rrc_reestablishmentCause", std::int64_t{1}}})),
              S(NasUp, "DetachRequest", hdr(kIntegrity))}};
    s[17] = {18,
             {S(Connect, "AttachRequest", hdr(kPlain)),
              S(Rrc, "securityModeCommand", F({{"lte_rrc_integrityProtAlgorithm", std::int64_t{1}}})),
              S(Rrc, "rrcConnectionReconfiguration"),
              S(NasDown, "SecurityModeCommand", hdr(kNewContext)),
              S(NasUp, "SecurityModeReject", hdr(kPlain))}};
    s[18] = {19,
             {S(Connect, "ServiceRequest", hdr(kServiceHeader)),
              S(NasDown, "AuthenticationRequest", hdr(kPlain)),
              S(NasUp, "AuthenticationResponse", hdr(kPlain)),
              S(Rrc, "rrcConnectionReconfiguration"),
              S(Rrc, "rrcConnectionReconfigurationComplete"),
              S(Rrc, "rrcConnectionReconfiguration"),
              S(Rrc, "rrcConnectionReconfigurationComplete"),
              S(Rrc, "rrcConnectionReconfiguration"),
              S(Rrc, "rrcConnectionReconfigurationComplete")}};
    s[19] = {20,
             {S(Connect, "TrackingAreaUpdateRequest", hdr(kIntegrity)),
              S(NasDown, "TrackingAreaUpdateReject", merge(cause(7), F({{"gsm_a_extension", std::int64_t{0}}}))),
              S(Rrc, "rrcConnectionRelease")}};
    s[20] = {21,
             {S(Rrc, "paging", F({{"lte_rrc_etws_Indication", std::int64_t{1}}, {"lte_rrc_cmas_Indication_r9", std::int64_t{1}}})),
              S(Rrc, "systemInformation", F({{"lte_rrc_warningMessageSegment_r9", std::int64_t{1}}})),
              S(Connect, "TrackingAreaUpdateRequest", hdr(kIntegrity)),
              S(NasDown, "EMMInformation", merge(hdr(kPlain), F({{"gsm_a_dtap_text_string", std::string("Emergency Alert")}})))}};
    return s;
}

std::int64_t header_of(const FieldMap& f) {
    auto it = f.find("nas_eps_security_header_type");
    if (it != f.end())
        if (auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
    return kPlain;
}

void run_script(Builder& b, const AttackScript& script, const Cell& fbs, Label label) {
    for (const auto& step : script.steps) {
        switch (step.op) {
            case StepOp::Rrc: b.rrc(step.kind, fbs, label, step.fields); break;
            case StepOp::NasDown: b.nas_transfer(true, step.kind, fbs, label, header_of(step.fields), step.fields); break;
            case StepOp::NasUp: b.nas_transfer(false, step.kind, fbs, label, header_of(step.fields), step.fields); break;
            case StepOp::Connect:
                b.connect(step.kind, fbs, label, header_of(step.fields), step.fields,
                          step.kind == "ServiceRequest" ? kMoData
                          : step.kind == "AttachRequest" ? kMoSignalling : kMtAccess);
                break;
            case StepOp::Page: b.page(step.kind, fbs, label, step.fields); break;
        }
    }
}

}  // namespace

void check_spec(const ScenarioSpec& spec) {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::Validation, m); };
    if (spec.n_traces < 1) fail("n_traces must be positive");
    if (spec.noise < 0.0 || spec.noise > 1.0) fail("noise must lie in [0,1]");
    switch (spec.scenario.kind) {
        case Label::Kind::Benign:
            if (spec.attacker_level != 0) fail("benign scenario takes attacker level 0");
            break;
        case Label::Kind::Fbs:
            if (spec.attacker_level < 0 || spec.attacker_level > 2) fail("fbs scenario requires level 0..2");
            break;
        case Label::Kind::Msa:
            if (!is_registered_attack(spec.scenario.attack))
                throw Error(ErrorKind::UnregisteredAttack, to_string(spec.scenario));
            if (spec.attacker_level < 3 || spec.attacker_level > 4) fail("msa scenario requires level 3..4");
            break;
    }
}

const AttackScript& attack_script(int attack) {
    static const std::vector<AttackScript> scripts = make_scripts();
    if (!is_registered_attack(attack))
        throw Error(ErrorKind::UnregisteredAttack, "no script for attack " + std::to_string(attack));
    return scripts[static_cast<std::size_t>(attack - 1)];
}

Trace gen_benign(const ScenarioSpec& spec, std::uint64_t trace_index) {
    if (spec.scenario.kind != Label::Kind::Benign) throw Error(ErrorKind::Validation, "gen_benign needs a benign spec");
    return gen_session(spec, trace_index, false);
}

Trace gen_fbs(const ScenarioSpec& spec, std::uint64_t trace_index) {
    if (spec.scenario.kind != Label::Kind::Fbs || spec.attacker_level > 2 || spec.attacker_level < 0)
        throw Error(ErrorKind::Validation, "gen_fbs needs an fbs spec with level 0..2");
    return gen_session(spec, trace_index, true);
}

Trace gen_msa(const ScenarioSpec& spec, std::uint64_t trace_index) {
    if (spec.scenario.kind != Label::Kind::Msa || spec.attacker_level < 3)
        throw Error(ErrorKind::Validation, "gen_msa needs an msa spec with level >= 3");
    const AttackScript& script = attack_script(spec.scenario.attack);
    Trace t = start_trace(spec, trace_index);
    Rng rng(t.seed);
    Ue ue = make_ue(rng);
    Cell legit = make_legit_cell(rng);
    Cell fbs = make_fbs_cell(rng, legit, 2);
    Builder b(t, ue);
    attach_flow(b, legit);
    b.chatter(rng, spec.noise, legit);
    b.rrc("rrcConnectionRelease", legit, Label::benign());
    const Label label = spec.scenario;
    b.rrc("systemInformationBlockType1", fbs, label);
    run_script(b, script, fbs, label);
    if (spec.attacker_level == 4) return reshape(t, splitmix64(t.seed ^ 0x5eedULL));
    return t;
}

Trace generate(const ScenarioSpec& spec, std::uint64_t trace_index) {
    switch (spec.scenario.kind) {
        case Label::Kind::Benign: return gen_benign(spec, trace_index);
        case Label::Kind::Fbs: return gen_fbs(spec, trace_index);
        case Label::Kind::Msa: return gen_msa(spec, trace_index);
    }
    return {};
}

const std::vector<MutableField>& non_critical_fields(Layer layer, std::string_view kind) {
    static const std::vector<std::int64_t> reserved_headers = {6, 7, 8, 9, 10, 11};
    static const std::vector<std::int64_t> causes = {3, 6, 8, 11, 12, 13, 14, 15, 22, 25, 35};
    static const std::vector<std::int64_t> optional_ie = {1, 2, 3};
    static const std::map<std::string, std::vector<MutableField>, std::less<>> nas = {
        {"AttachReject", {{"nas_eps_emm_cause", causes}, {"nas_eps_security_header_type", reserved_headers},
                          {"gsm_a_extension", optional_ie}}},
        {"TrackingAreaUpdateReject", {{"nas_eps_emm_cause", causes}, {"nas_eps_security_header_type", reserved_headers},
                                      {"gsm_a_extension", optional_ie}}},
        {"ServiceReject", {{"nas_eps_emm_cause", causes}, {"nas_eps_security_header_type", reserved_headers},
                           {"gsm_a_extension", optional_ie}}},
        {"AuthenticationReject", {{"nas_eps_security_header_type", reserved_headers}}},
        {"IdentityRequest", {{"nas_eps_security_header_type", reserved_headers}}},
        {"AuthenticationRequest", {{"nas_eps_emm_nas_key_setid", {0, 1, 2, 3, 4, 5}},
                                   {"nas_eps_security_header_type", reserved_headers}}},
        {"PagingWithIMSI", {{"nas_eps_security_header_type", reserved_headers}}},
        {"EMMInformation", {{"gsm_a_dtap_coding_scheme", {1, 2}}, {"nas_eps_security_header_type", reserved_headers}}},
        {"TrackingAreaUpdateAccept", {{"gsm_a_extension", optional_ie}}},
        {"SecurityModeCommand", {{"nas_eps_emm_imeisv_req", {0, 1}}}},
    };
    static const std::map<std::string, std::vector<MutableField>, std::less<>> rrc = {
        {"ueInformationRequest", {{"lte_rrc_rach_ReportReq_r9", {0, 1}}}},
        {"rrcConnectionRelease", {{"lte_rrc_releaseCause", {0, 1, 2, 3}}}},
        {"rrcReject", {{"lte_rrc_waitTime", {1, 2, 4, 8, 12, 16}}}},
        {"rrcConnectionReestablishmentReject", {{"per_extension_bit", {0, 1}}}},
        {"paging", {{"lte_rrc_systemInfoModification", {0, 1}}}},
        {"systemInformation", {{"per_extension_bit", {0, 1}}}},
        {"rrcConnectionReconfiguration", {{"lte_rrc_nonCriticalExtension", {0, 1, 2}}}},
        {"ueCapabilityEnquiry", {{"lte_rrc_nonCriticalExtension", {0, 1, 2}}}},
        {"rrcResume", {{"lte_rrc_nonCriticalExtension", {0, 1, 2}}}},
    };
    static const std::vector<MutableField> none;
    const auto& table = layer == Layer::Nas ? nas : rrc;
    auto it = table.find(kind);
    return it == table.end() ? none : it->second;
}

Trace reshape(const Trace& trace, std::uint64_t seed) {
    if (trace.scenario.kind == Label::Kind::Benign)
        throw Error(ErrorKind::NotAnAttackTrace, trace.trace_id);
    Rng rng(splitmix64(seed ^ trace.seed));
    Trace out = trace;

    // (a) field mutation on attack packets; keep NAS carriers in sync.
    for (std::size_t i = 0; i < out.packets.size(); ++i) {
        Packet& p = out.packets[i];
        if (p.label.is_benign()) continue;
        const std::string before = Builder::carried(p.kind, p.fields);
        for (const auto& mf : non_critical_fields(p.layer, p.kind)) {
            std::optional<std::int64_t> cur = p.int_field(mf.field);
            std::vector<std::int64_t> alts;
            for (auto a : mf.alternatives)
                if (!cur || a != *cur) alts.push_back(a);
            if (alts.empty()) continue;
            p.fields.insert_or_assign(std::string(mf.field), FieldValue{rng.pick(alts)});
        }
        if (p.layer == Layer::Nas) {
            const std::string after = Builder::carried(p.kind, p.fields);
            for (std::size_t j = i; j-- > 0;) {
                Packet& c = out.packets[j];
                if (c.layer != Layer::Rrc) continue;
                auto* d = c.field("lte_rrc_dedicatedInfoNAS");
                if (d && std::holds_alternative<std::string>(*d) && std::get<std::string>(*d) == before)
                    c.fields["lte_rrc_dedicatedInfoNAS"] = after;
                break;
            }
        }
    }

    // (b) benign message injection before the first attack packet.
    auto first = std::find_if(out.packets.begin(), out.packets.end(),
                              [](const Packet& p) { return !p.label.is_benign(); });
    std::size_t pos = static_cast<std::size_t>(first - out.packets.begin());
    std::vector<Packet> injected;
    auto make = [&](Layer layer, std::string kind, FieldMap fields) {
        Packet p;
        p.trace_id = out.trace_id;
        p.layer = layer;
        p.kind = std::move(kind);
        p.fields = std::move(fields);
        p.label = Label::benign();
        injected.push_back(std::move(p));
    };
    static const std::vector<std::string> nas_candidates = {"IdentityRequest", "AuthenticationRequest", "EMMInformation"};
    int n_nas = static_cast<int>(rng.range(1, 3));
    int n_rrc = static_cast<int>(rng.range(0, 2));
    for (int k = 0; k < n_rrc; ++k)
        make(Layer::Rrc, rng.chance(0.5) ? "dlInformationTransfer" : "ulInformationTransfer",
             {{"lte_rrc_dedicatedInfoNAS", std::string("ESM:2")}, {"lte_rrc_dedicatedInfoType", std::int64_t{1}}});
    for (int k = 0; k < n_nas; ++k) {
        const std::string& kind = rng.pick(nas_candidates);
        FieldMap f = {{"gsm_a_L3_protocol_discriminator", std::int64_t{7}},
                      {"nas_eps_security_header_type", std::int64_t{0}}};
        if (kind == "IdentityRequest") f["nas_eps_emm_id_type2"] = std::int64_t{3};
        if (kind == "AuthenticationRequest") {
            f["nas_eps_emm_nas_key_setid"] = std::int64_t{0};
            f["gsm_a_dtap_rand"] = std::int64_t{1};
            f["gsm_a_dtap_autn"] = std::int64_t{1};
        }
        if (kind == "EMMInformation") {
            f["gsm_a_dtap_text_string"] = std::string("Carrier");
            f["gsm_a_dtap_coding_scheme"] = std::int64_t{0};
        }
        make(Layer::Rrc, "dlInformationTransfer",
             {{"lte_rrc_dlInformationTransfer_element", std::int64_t{1}},
              {"lte_rrc_dedicatedInfoType", std::int64_t{0}},
              {"lte_rrc_dedicatedInfoNAS", kind + ":0"}});
        make(Layer::Nas, kind, std::move(f));
    }
    out.packets.insert(out.packets.begin() + static_cast<std::ptrdiff_t>(pos), injected.begin(), injected.end());
    for (std::size_t i = 0; i < out.packets.size(); ++i) out.packets[i].seq = static_cast<std::uint32_t>(i);
    if (out.scenario.kind == Label::Kind::Msa) out.attacker_level = 4;
    return out;
}

Dataset gen_dataset(std::span<const ScenarioSpec> specs, int workers) {
    Dataset ds;
    std::vector<std::pair<const ScenarioSpec*, std::uint64_t>> jobs;
    std::uint64_t index = 0;
    for (const auto& spec : specs) {
        check_spec(spec);
        ds.manifest.specs.push_back(spec);
        for (int i = 0; i < spec.n_traces; ++i) jobs.emplace_back(&spec, index++);
    }
    ds.traces.resize(jobs.size());
    workers = std::max(1, workers);
    auto run = [&](int w) {
        for (std::size_t i = static_cast<std::size_t>(w); i < jobs.size(); i += static_cast<std::size_t>(workers))
            ds.traces[i] = generate(*jobs[i].first, jobs[i].second);
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }
    for (const auto& t : ds.traces) ds.manifest.counts[trace_class(t)]++;
    ds.manifest.total = static_cast<int>(ds.traces.size());
    return ds;
}

std::string manifest_to_json(const Manifest& m) {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["total"] = m.total;
    j["counts"] = m.counts;
    auto specs = nlohmann::ordered_json::array();
    for (const auto& s : m.specs) {
        nlohmann::ordered_json sj;
        sj["scenario"] = to_string(s.scenario);
        sj["attacker_level"] = s.attacker_level;
        sj["mobility"] = s.mobility;
        sj["n_traces"] = s.n_traces;
        sj["master_seed"] = s.master_seed;
        sj["noise"] = s.noise;
        specs.push_back(std::move(sj));
    }
    j["specs"] = std::move(specs);
    return j.dump(2);
}

namespace {

std::string trim(std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorKind::Parse, "bad boolean '" + v + "'");
}

}  // namespace

std::vector<ScenarioSpec> parse_config(std::istream& in) {
    std::vector<ScenarioSpec> specs;
    std::optional<std::uint64_t> global_seed;
    std::vector<bool> seed_set;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line == "[spec]") {
            specs.emplace_back();
            seed_set.push_back(false);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        try {
            if (specs.empty()) {
                if (key == "seed") global_seed = std::stoull(val);
                else throw Error(ErrorKind::Parse, "unknown global key '" + key + "'");
                continue;
            }
            ScenarioSpec& s = specs.back();
            if (key == "scenario") {
                if (val == "benign") s.scenario = Label::benign();
                else if (val == "fbs") s.scenario = Label::fbs();
                else if (val == "msa") s.scenario = Label::msa(s.scenario.attack ? s.scenario.attack : 1);
                else throw Error(ErrorKind::Parse, "unknown scenario '" + val + "'");
            } else if (key == "attack") {
                auto id = find_attack(val);
                if (!id) throw Error(ErrorKind::UnregisteredAttack, val);
                s.scenario = Label::msa(*id);
            } else if (key == "level") {
                s.attacker_level = std::stoi(val);
            } else if (key == "mobility") {
                s.mobility = parse_bool(val);
            } else if (key == "traces") {
                s.n_traces = std::stoi(val);
            } else if (key == "seed") {
                s.master_seed = std::stoull(val);
                seed_set.back() = true;
            } else if (key == "noise") {
                s.noise = std::stod(val);
            } else {
                throw Error(ErrorKind::Parse, "unknown key '" + key + "'");
            }
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": bad value '" + val + "'");
        }
    }
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (!seed_set[i] && global_seed) specs[i].master_seed = *global_seed;
    for (const auto& s : specs) check_spec(s);
    return specs;
}

std::vector<ScenarioSpec> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    return parse_config(in);
}

}  // namespace fbsd::sim
