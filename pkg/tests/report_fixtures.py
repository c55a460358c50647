"""Handwritten raw reports with the section maps they should parse to.

``expected`` is None when parsing must fail.
"""

HANDCRAFTED = [
    (
        "plain",
        "HISTORY: headache for two weeks\n"
        "TECHNIQUE: MRI brain with and without contrast\n"
        "FINDINGS: 2.3 cm enhancing mass in the left frontal lobe.\n"
        "IMPRESSION: Left frontal mass, likely high grade glioma.\n",
        {
            "HISTORY": "headache for two weeks",
            "TECHNIQUE": "MRI brain with and without contrast",
            "FINDINGS": "2.3 cm enhancing mass in the left frontal lobe.",
            "IMPRESSION": "Left frontal mass, likely high grade glioma.",
        },
    ),
    (
        "headings on own line",
        "FINDINGS\nNo acute intracranial abnormality.\nVentricles are normal.\n\n"
        "IMPRESSION\nNormal study.\n",
        {"FINDINGS": "No acute intracranial abnormality.\nVentricles are normal.", "IMPRESSION": "Normal study."},
    ),
    (
        "aliases",
        "Clinical History: seizure\nProcedure: CT head\nObservations: stable postoperative change\n"
        "Conclusion: no recurrence\n",
        {
            "HISTORY": "seizure",
            "TECHNIQUE": "CT head",
            "FINDINGS": "stable postoperative change",
            "IMPRESSION": "no recurrence",
        },
    ),
    (
        "lower case and indentation",
        "  findings:   small meningioma along the falx\n\timpressions: meningioma, unchanged\n",
        {"FINDINGS": "small meningioma along the falx", "IMPRESSION": "meningioma, unchanged"},
    ),
    (
        "preamble and crlf",
        "Patient: XX\r\nFINDINGS: hyperintense lesion\r\nIMPRESSION: possible low grade tumor\r\n",
        {"FINDINGS": "hyperintense lesion", "IMPRESSION": "possible low grade tumor"},
    ),
    (
        "heading word inside a sentence",
        "FINDINGS: the impression from prior imaging is unchanged. Findings: stable.\n"
        "IMPRESSION: stable exam\n",
        {"FINDINGS": "the impression from prior imaging is unchanged. Findings: stable.", "IMPRESSION": "stable exam"},
    ),
    (
        "impression before findings",
        "INDICATION: follow up\nIMPRESSION: resolved\nFINDINGS: no residual enhancement\n",
        {"HISTORY": "follow up", "IMPRESSION": "resolved", "FINDINGS": "no residual enhancement"},
    ),
    (
        "multi-word alias spacing",
        "CLINICAL   INDICATION: mass\nFINDINGS: 1 cm lesion\nOPINION: metastasis favored\n",
        {"HISTORY": "mass", "FINDINGS": "1 cm lesion", "IMPRESSION": "metastasis favored"},
    ),
    (
        "unknown heading stays in body",
        "FINDINGS: enhancing lesion\nCOMPARISON: none\nIMPRESSION: tumor\n",
        {"FINDINGS": "enhancing lesion\nCOMPARISON: none", "IMPRESSION": "tumor"},
    ),
    (
        "missing impression",
        "HISTORY: headache\nFINDINGS: unremarkable brain\n",
        None,
    ),
]
