from adsputils import ADSCelery


class DFTCCelery(ADSCelery):
    """
    Pipeline application. Holds the merged defaults from config.py (and
    local_config.py) in ``conf``; every stage task reads its section defaults
    from here.
    """

    def section(self, name):
        """
        Returns a copy of a configuration section, e.g. ``section('PLANT')``

        :param name: upper-case name of the section constant
        :return: dict with the section defaults
        """
        return dict(self.conf[name])
