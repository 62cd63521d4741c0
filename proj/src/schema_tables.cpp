// SPDX-License-Identifier: Apache-2.0
// Per-layer field schemas. NAS columns follow the tshark field names of the
// extracted NAS feature set; RRC extends the published subset to 183 columns.

#include "fbsd/schema.hpp"

#include <array>
#include <string>
#include <unordered_map>

namespace fbsd {

namespace {

const std::array<std::string_view, 119> kNasFields = {
    "nas_eps_common_elem_id", "nas_eps_emm_EPS_attach", "gsm_a_dtap_add_ci",
    "nas_eps_msg_auth_code", "gsm_a_dtap_elem_id", "nas_eps_emm_eia6",
    "nas_eps_emm_eea4", "nas_eps_emm_eia0", "gsm_a_extension",
    "nas_eps_emm_iwkn26", "e212_assoc_imsi", "nas_eps_emm_spare_half",
    "nas_eps_emm_eps_att", "nas_eps_emm_cause", "nas_eps_emm_cp_ciot",
    "nas_eps_emm_detach_type", "e212_tai_mnc", "nas_eps_emm_detach_req",
    "nas_eps_emm_mme_grp", "gsm_a_dtap_dst_adjustment", "nas_eps_emm_epco",
    "nas_eps_emm_15_bearers", "nas_eps_emm_tsc", "nas_eps_emm_er_wo",
    "nas_eps_emm_restrict_dcnr", "gsm_a_dtap_timezone", "nas_eps_emm_hc_cp",
    "nas_eps_emm_imeisv_req", "e212_imsi", "gsm_a_dtap_text_string",
    "nas_eps_emm_nas_key_setid", "gsm_a_id_dig_1", "e212_mnc",
    "nas_eps_emm_128eea1", "nas_eps_emm_switch_off", "nas_eps_emm_s1_u",
    "nas_eps_emm_tai_n", "gsm_a_oddevenind", "gsm_a_spare_bits",
    "nas_eps_emm_eea6", "nas_eps_emm_eia3", "gsm_a_dtap_autn",
    "nas_eps_emm_eea7", "nested_field3", "nas_eps_emm_ims_vops",
    "gsm_a_gm_gmm_tmsi", "nas_eps_emm_odd_even", "nas_eps_emm_toi",
    "gsm_a_gm_elem_id", "gsm_a_dtap_rand", "nas_eps_emm_eia7",
    "nas_eps_emm_128eia2", "nas_eps_emm_eia5", "nas_eps_emm_tai_tol",
    "nas_eps_emm_toc", "nas_eps_emm_res", "gsm_a_dtap_time_zone",
    "nas_eps_emm_elem_id", "nas_eps_emm_tai_tac", "nas_eps_spare_bits",
    "gsm_a_common_elem_id", "ws_expert", "nas_eps_emm_m_tmsi",
    "gsm_a_dtap_number_of_sparebits", "gsm_a_ie_mobileid_type", "nested_field4",
    "nas_eps_emm_esr_ps", "nas_eps_emm_hash_mme", "gsm_a_imeisv",
    "nas_eps_emm_active_flg", "nas_eps_emm_esm_msg", "nested_field1",
    "nas_eps_emm_id_type2", "e212_mcc", "3gpp_tmsi",
    "gsm_a_gm_gmm_gprs", "gsm_a_filler", "nas_eps_emm_eea0",
    "nas_eps_security_header_type", "nas_eps_emm_128eia1", "nas_eps_emm_eea5",
    "gsm_a_len", "e212_tai_mcc", "gsm_a_dtap_coding_scheme",
    "nas_eps_emm_eia4", "nas_eps_emm_ebi0", "nested_field2",
    "nas_eps_emm_ebi13", "nas_eps_seq_no", "nas_eps_emm_ebi2",
    "nested_field5", "nas_eps_emm_ebi14", "nas_eps_emm_cs_lcs",
    "nas_eps_emm_ebi12", "nas_eps_emm_restrict_ec", "nas_eps_emm_ebi7",
    "nas_eps_nas_msg_emm_type_value", "nas_eps_emm_ebi4", "nas_eps_emm_guti_type",
    "nas_eps_emm_ebi8", "nas_eps_emm_up_ciot", "nas_eps_emm_ebi1",
    "gsm_a_L3_protocol_discriminator", "nas_eps_emm_ebi9", "nas_eps_emm_update_type",
    "nas_eps_emm_ebi3", "nas_eps_emm_type_of", "nas_eps_emm_ebi10",
    "nas_eps_emm_128eea2", "nas_eps_emm_ebi11", "nested_field6",
    "nas_eps_emm_ebi6", "nas_eps_emm_mme_code", "nas_eps_emm_ebi15",
    "nas_eps_emm_eea3", "nas_eps_emm_eps_update_resultvalue", "nas_eps_emm_epc_lcs",
    "nas_eps_emm_ebi5", "nas_eps_emm_emc_bs",
};

const std::array<std::string_view, 183> kRrcFields = {
    "lte_rrc_si_WindowLength", "lte_rrc_ue_Identity", "lte_rrc_DL_CCCH_Message",
    "per_extension_present_bit", "lte_rrc_shortMAC_I", "lte_rrc_maxHARQ_Tx",
    "lte_rrc_rlf_InfoAvailable_r10", "lte_rrc_phich_Duration", "lte_rrc_m_TMSI",
    "lte_rrc_mnc", "lte_rrc_setup_element", "lte_rrc_rrcConnectionRequest_r8_element",
    "lte_rrc_pdsch_ConfigDedicated_element", "lte_rrc_message", "lte_rrc_csg_Indication",
    "lte_rrc_ackNackRepetition", "lte_rrc_rrcConnectionRelease_element", "ws_expert",
    "lte_rrc_ul_SCH_Config", "lte_rrc_p_a", "lte_rrc_uplinkPowerControlDedicated_element",
    "lte_rrc_ulInformationTransfer_element", "lte_rrc_sr_PUCCH_ResourceIndex", "lte_rrc_dedicatedInfoNAS",
    "lte_rrc_systemInfoModification", "lte_rrc_UL_DCCH_Message", "lte_rrc_securityModeCommand_r8_element",
    "lte_rrc_securityModeComplete_r8_element", "lte_rrc_cellAccessRelatedInfo_element", "lte_rrc_securityConfigSMC_element",
    "lte_rrc_timeAlignmentTimerDedicated", "lte_rrc_messageClassExtension_element", "lte_rrc_PCCH_Message_element",
    "lte_rrc_srb_ToAddModList", "lte_rrc_cqi_pmi_ConfigIndex", "per_small_number_bit",
    "lte_rrc_trackingAreaCode", "lte_rrc_q_RxLevMin", "lte_rrc_lateNonCriticalExtension",
    "lte_rrc_pagingRecordList", "lte_rrc_plmn_IdentityList", "lte_rrc_pusch_ConfigDedicated_element",
    "lte_rrc_mcc", "lte_rrc_rrcConnectionSetup_r8_element", "per_open_type_length",
    "ws_expert_group", "per_num_sequence_extensions", "lte_rrc_reestablishmentCause",
    "lte_rrc_p0_UE_PUSCH", "lte_rrc_rrcConnectionRequest_element", "lte_rrc_retxBSR_Timer",
    "lte_rrc_BCCH_BCH_Message", "lte_rrc_sr_SubframeOffset", "lte_rrc_securityAlgorithmConfig_element",
    "lte_rrc_BCCH_DL_SCH_Messageelement", "lte_rrc_integrityProtAlgorithm", "lte_rrc_rrcConnectionReconfiguration_r8_element",
    "lte_rrc_selectedPLMN_Identity", "lte_rrc_systemInfoModification_eDRX_r13", "lte_rrc_widebandCQI_element",
    "lte_rrc_transmissionMode", "lte_rrc_ueCapabilityInformation_element", "lte_rrc_simultaneousAckNackAndCQI",
    "lte_rrc_measResultLastServCell_r9_element", "lte_rrc_cmas_Indication_r9", "lte_rrc_cipheringAlgorithm",
    "lte_rrc_mac_MainConfig", "lte_rrc_securityModeCommand_element", "per_extension_bit",
    "lte_rrc_rach_ReportReq_r9", "lte_rrc_dedicatedInfoNASList", "lte_rrc_rrcConnectionSetupComplete_element",
    "per_optional_field_bit", "lte_rrc_systemInfoValueTag", "lte_rrc_drb_ToAddModList",
    "lte_rrc_p0_UE_PUCCH", "per_enum_index", "lte_rrc_rlf_Report_r9",
    "lte_rrc_explicitValue_element", "lte_rrc_radioResourceConfigDedicated_element", "lte_rrc_mmec",
    "lte_rrc_betaOffset_CQI_Index", "lte_rrc_rlf_ReportReq_r9", "lte_rrc_cqi_ReportPeriodic",
    "lte_rrc_dsr_TransMax", "lte_rrc_systemInfoUnchanged_BR_r15", "lte_rrc_cellIdentity",
    "lte_rrc_ue_CapabilityRAT_ContainerList", "lte_rrc_quantityConfig_element", "lte_rrc_sibs_changing",
    "lte_rrc_cqi_FormatIndicatorPeriodic", "lte_rrc_release_element", "lte_rrc_phich_Resource",
    "lte_rrc_dedicatedInfoType", "lte_rrc_freqBandIndicator", "lte_rrc_rsrpResult_r9",
    "lte_rrc_ue_TransmitAntennaSelection", "lte_rrc_cellGlobalId_r10_element", "lte_rrc_cqi_ReportConfig_element",
    "lte_rrc_pSRS_Offset", "lte_rrc_ueCapabilityEnquiry_element", "lte_rrc_ueCapabilityEnquiry_r8_element",
    "lte_rrc_prohibitPHR_Timer", "lte_rrc_cellBarred", "per_octet_string_length",
    "lte_rrc_antennaInfo", "lte_rrc_UL_CCCH_Message", "lte_rrc_cqi_PUCCH_ResourceIndex",
    "lte_rrc_securityModeComplete_element", "lte_rrc_sr_Periodicity", "lte_rrc_betaOffset_RI_Index",
    "lte_rrc_ue_Identity_element", "lte_rrc_ueInformationResponse_r9_element", "lte_rrc_pucch_ConfigDedicated_element",
    "lte_rrc_connectionFailureType_r10", "lte_rrc_deltaMCS_Enabled", "lte_rrc_periodicPHR_Timer",
    "lte_rrc_failedPCellId_r10", "lte_rrc_nomPDSCH_RS_EPRE", "lte_rrc_dlInformationTransfer_element",
    "lte_rrc_c1_showname", "lte_rrc_physCellId", "lte_rrc_cellReselectionPriority",
    "lte_rrc_establishmentCause", "lte_rrc_dl_CarrierFreq", "lte_rrc_releaseCause",
    "lte_rrc_redirectedCarrierInfo", "lte_rrc_waitTime", "lte_rrc_mobilityControlInfo",
    "lte_rrc_targetPhysCellId", "lte_rrc_rat_Type", "lte_rrc_resumeIdentity_r13",
    "lte_rrc_etws_Indication", "lte_rrc_imsi", "lte_rrc_s_TMSI",
    "lte_rrc_warningMessageSegment_r9", "lte_rrc_measResultNeighCells_r9", "lte_rrc_rsrpResult",
    "lte_rrc_rsrqResult", "lte_rrc_t300", "lte_rrc_t301",
    "lte_rrc_t310", "lte_rrc_n310", "lte_rrc_t311",
    "lte_rrc_n311", "lte_rrc_dl_Bandwidth", "lte_rrc_ul_Bandwidth",
    "lte_rrc_schedulingInfoList", "lte_rrc_si_Periodicity", "lte_rrc_sib_MappingInfo",
    "lte_rrc_plmn_Identity_element", "lte_rrc_cellReservedForOperatorUse", "lte_rrc_intraFreqReselection",
    "lte_rrc_s_IntraSearch", "lte_rrc_s_NonIntraSearch", "lte_rrc_threshServingLow",
    "lte_rrc_q_Hyst", "lte_rrc_interFreqCarrierFreqList", "lte_rrc_threshX_High",
    "lte_rrc_threshX_Low", "lte_rrc_defaultPagingCycle", "lte_rrc_nB",
    "lte_rrc_pagingRecordList_count", "lte_rrc_cn_Domain", "lte_rrc_srb_Identity",
    "lte_rrc_drb_Identity", "lte_rrc_eps_BearerIdentity", "lte_rrc_pdcp_Config_element",
    "lte_rrc_rlc_Config_element", "lte_rrc_logicalChannelConfig_element", "lte_rrc_measConfig_element",
    "lte_rrc_measObjectToAddModList", "lte_rrc_reportConfigToAddModList", "lte_rrc_measIdToAddModList",
    "lte_rrc_rrc_TransactionIdentifier", "lte_rrc_criticalExtensions", "lte_rrc_nonCriticalExtension",
    "lte_rrc_ue_CapabilityRequest", "lte_rrc_supportedBandListEUTRA", "lte_rrc_accessStratumRelease",
    "lte_rrc_ue_Category", "lte_rrc_shortMAC_I_present", "lte_rrc_rach_Report_r9",
};

}  // namespace

std::span<const std::string_view> field_schema(Layer layer) {
    if (layer == Layer::Nas) return {kNasFields.data(), kNasFields.size()};
    return {kRrcFields.data(), kRrcFields.size()};
}

std::optional<std::size_t> field_column(Layer layer, std::string_view name) {
    static const auto build = [](Layer l) {
        std::unordered_map<std::string, std::size_t> m;
        auto cols = field_schema(l);
        for (std::size_t i = 0; i < cols.size(); ++i) m.emplace(std::string(cols[i]), i);
        return m;
    };
    static const auto nas = build(Layer::Nas);
    static const auto rrc = build(Layer::Rrc);
    const auto& m = layer == Layer::Nas ? nas : rrc;
    auto it = m.find(std::string(name));
    if (it == m.end()) return std::nullopt;
    return it->second;
}

std::string_view kind_field(Layer layer) {
    return layer == Layer::Nas ? "nas_eps_nas_msg_emm_type_value" : "lte_rrc_c1_showname";
}

}  // namespace fbsd
